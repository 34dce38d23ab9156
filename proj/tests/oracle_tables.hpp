// SPDX-License-Identifier: Apache-2.0
// Hand-computed reference values (40-digit arithmetic, rounded to double).
#pragma once

#include "dyconfid/core.hpp"

namespace dyconfid::oracle {

struct MapRow { double x; MappingKind mapping; double k; double expected; };
struct TauRow { double average_confidence; double a; double expected; };
struct ClassThresholdRow { double class_conf; double tau; double expected; };
struct WarmupRow { int epoch; int max_epochs; double expected; };
struct WeightRow { double class_conf; double confidence; double w; double tau; double expected; };

inline constexpr MapRow kMapRows[] = {
    {0.0, MappingKind::Concave, 2.0, 0.0},
    {0.1, MappingKind::Concave, 2.0, 0.052631578947368425},
    {0.25, MappingKind::Concave, 2.0, 0.14285714285714285},
    {0.5, MappingKind::Concave, 2.0, 0.3333333333333333},
    {0.75, MappingKind::Concave, 2.0, 0.6},
    {0.9, MappingKind::Concave, 2.0, 0.8181818181818182},
    {1.0, MappingKind::Concave, 2.0, 1.0},
    {0.3, MappingKind::Concave, 3.0, 0.1111111111111111},
    {0.6, MappingKind::Concave, 1.5, 0.6666666666666666},
    {0.5, MappingKind::Concave, 1.0, 1.0},
    {0.2, MappingKind::Linear, 2.0, 0.2},
    {0.85, MappingKind::Linear, 2.0, 0.85},
    {0.0, MappingKind::Exponential, 2.0, 0.006737946999085467},
    {0.4, MappingKind::Exponential, 2.0, 0.16529888822158656},
    {0.8, MappingKind::Exponential, 2.0, 0.8187307530779819},
    {1.0, MappingKind::Exponential, 2.0, 1.0},
};

inline constexpr TauRow kTauRows[] = {
    {0.0, 2.0, 1.0},
    {0.1, 2.0, 0.9801986733067553},
    {0.3, 2.0, 0.835270211411272},
    {0.5, 2.0, 0.6065306597126334},
    {0.6, 2.0, 0.4867522559599717},
    {0.7, 2.0, 0.37531109885139957},
    {0.8, 2.0, 0.2780373004531941},
    {0.9, 2.0, 0.19789869908361465},
    {0.95, 2.0, 0.16447445657715493},
    {1.0, 2.0, 0.1353352832366127},
    {0.5, 1.0, 0.7788007830714049},
    {0.8, 3.0, 0.1466069621303501},
};

// Concave mapping, k = 2.
inline constexpr ClassThresholdRow kClassThresholdRows[] = {
    {0.0, 0.8, 0.19999999999999996},
    {0.1, 0.8, 0.19999999999999996},
    {0.3, 0.8, 0.19999999999999996},
    {0.5, 0.8, 0.3333333333333333},
    {0.6, 0.8, 0.42857142857142855},
    {0.9, 0.8, 0.8},
    {1.0, 0.8, 0.8},
    {0.5, 0.3, 0.3333333333333333},
    {0.9, 0.3, 0.7},
    {0.05, 0.3, 0.3},
    {0.4, 0.95, 0.25},
    {0.99, 0.95, 0.95},
    {0.7, 0.5, 0.5},
};

inline constexpr WarmupRow kWarmupRows[] = {
    {0, 500, 0.006737946999085467},
    {50, 500, 0.01742237463949351},
    {100, 500, 0.04076220397836622},
    {250, 500, 0.2865047968601901},
    {400, 500, 0.8187307530779818},
    {500, 500, 1.0},
    {0, 1, 0.006737946999085467},
    {1, 1, 1.0},
    {3, 10, 0.08629358649937051},
    {7, 10, 0.6376281516217733},
    {33, 100, 0.1059805173868818},
};

inline constexpr WeightRow kWeightRows[] = {
    {0.9, 0.95, 1.0, 0.8, 0.14500000000000002},
    {0.9, 0.5, 0.5, 0.8, 0.775},
    {0.7, 0.9, 1.0, 0.8, 1.37},
    {0.7, 0.9, 0.2, 0.8, 1.8739999999999999},
    {0.8, 0.8, 1.0, 0.8, 1.3599999999999999},
    {0.81, 0.99, 1.0, 0.8, 0.19809999999999994},
    {0.0, 0.5, 1.0, 0.8, 2.0},
    {0.5, 0.6, 0.00673794699908547, 0.8, 1.9979786159002744},
    {0.95, 1.0, 1.0, 0.2, 0.050000000000000044},
    {0.1, 0.4, 0.3, 0.2, 1.988},
    {0.3, 0.7, 0.9, 0.25, 0.811},
    {1.0, 1.0, 1.0, 0.8, 0.0},
};

}  // namespace dyconfid::oracle
