#pragma once

#include <utility>
#include <vector>

namespace fibertrack {

using CostMatrix = std::vector<std::vector<double>>;
using Assignment = std::vector<std::pair<int, int>>;

// Minimum-total-cost assignment of an n x m matrix of finite, non-negative
// costs. The matrix is padded to square with zero-cost entries internally;
// only pairs covering real rows and columns are returned, ordered by row.
//
// Among all minimum-cost assignments the lexicographically smallest one (in
// the row -> column mapping) is returned: ties are resolved by re-matching
// inside the zero-reduced-cost graph of the optimal duals.
Assignment hungarian(const CostMatrix& cost);

// Total cost of an assignment under the given matrix.
double assignment_cost(const CostMatrix& cost, const Assignment& assignment);

}  // namespace fibertrack
