#include "iplpmb/assignment.hpp"

#include "iplpmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>

namespace iplpmb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path (Jonker-Volgenant style potentials), rows <= cols.
// Forbidden entries are replaced by a sentinel large enough that any assignment
// touching one costs more than every fully feasible assignment.
std::optional<Assignment> solve_raw(const CostMatrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  const auto m = static_cast<int>(cost.cols());
  if (n == 0) {
    return Assignment{};
  }
  double max_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (std::isfinite(c)) {
        max_abs = std::max(max_abs, std::abs(c));
        any = true;
      }
    }
    if (!any) {
      return std::nullopt;
    }
  }
  const double big = (2.0 * n + 2.0) * (max_abs + 1.0);
  auto a = [&](int i, int j) {
    const double c = cost(i - 1, j - 1);
    return std::isfinite(c) ? c : big;
  };

  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0);
  std::vector<int> way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      out.row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    const double c = cost(i, out.row_to_col[static_cast<std::size_t>(i)]);
    if (!std::isfinite(c)) {
      return std::nullopt;
    }
    out.cost += c;
  }
  return out;
}

void force_pair(CostMatrix& c, int row, int col) {
  for (int j = 0; j < c.cols(); ++j) {
    if (j != col) {
      c(row, j) = kInf;
    }
  }
  for (int i = 0; i < c.rows(); ++i) {
    if (i != row) {
      c(i, col) = kInf;
    }
  }
}

bool ranks_before(const Assignment& a, const Assignment& b) {
  if (a.cost != b.cost) {
    return a.cost < b.cost;
  }
  return a.row_to_col < b.row_to_col;
}

void check_shape(const CostMatrix& cost) {
  if (cost.rows() > cost.cols()) {
    throw Infeasible("assignment: " + std::to_string(cost.rows()) + " rows cannot be assigned to " +
                     std::to_string(cost.cols()) + " columns");
  }
  for (Eigen::Index i = 0; i < cost.size(); ++i) {
    const double c = cost.data()[i];
    if (std::isnan(c) || c == -kInf) {
      throw InvalidArgument("assignment: cost entries must be finite or +infinity");
    }
  }
}

}  // namespace

namespace {

// Optimal assignment that is lexicographically smallest among the optimal ones: walk
// rows in order and move each to the lowest column that still admits an optimal
// completion.
std::optional<Assignment> solve_lexicographic(const CostMatrix& cost) {
  auto best = solve_raw(cost);
  if (!best) {
    return std::nullopt;
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(best->cost));
  CostMatrix fixed = cost;
  const auto n = static_cast<int>(cost.rows());
  for (int r = 0; r < n; ++r) {
    const int current = best->row_to_col[static_cast<std::size_t>(r)];
    for (int c = 0; c < current; ++c) {
      if (!std::isfinite(fixed(r, c))) {
        continue;
      }
      CostMatrix trial = fixed;
      force_pair(trial, r, c);
      auto alt = solve_raw(trial);
      if (alt && alt->cost <= best->cost + tol) {
        alt->cost = std::min(alt->cost, best->cost);
        best = std::move(alt);
        break;
      }
    }
    force_pair(fixed, r, best->row_to_col[static_cast<std::size_t>(r)]);
  }
  // Recompute the total from the chosen entries.
  best->cost = 0.0;
  for (int r = 0; r < n; ++r) {
    best->cost += cost(r, best->row_to_col[static_cast<std::size_t>(r)]);
  }
  return best;
}

}  // namespace

Assignment solve_assignment(const CostMatrix& cost) {
  check_shape(cost);
  auto best = solve_lexicographic(cost);
  if (!best) {
    throw Infeasible("solve_assignment: no feasible assignment");
  }
  return *best;
}

std::vector<Assignment> murty_kbest(const CostMatrix& cost, int k) {
  if (k < 1) {
    throw InvalidArgument("murty_kbest: k must be >= 1");
  }
  check_shape(cost);

  struct Node {
    CostMatrix constrained;
    Assignment solution;
  };
  auto later = [](const Node& a, const Node& b) { return ranks_before(b.solution, a.solution); };
  std::priority_queue<Node, std::vector<Node>, decltype(later)> queue(later);

  queue.push(Node{cost, solve_assignment(cost)});
  std::vector<Assignment> out;
  const auto n = static_cast<int>(cost.rows());
  while (!queue.empty() && static_cast<int>(out.size()) < k) {
    Node node = queue.top();
    queue.pop();
    out.push_back(node.solution);
    if (static_cast<int>(out.size()) == k) {
      break;
    }
    CostMatrix constrained = std::move(node.constrained);
    for (int t = 0; t < n; ++t) {
      const int col = node.solution.row_to_col[static_cast<std::size_t>(t)];
      CostMatrix sub = constrained;
      sub(t, col) = kInf;
      if (auto sol = solve_lexicographic(sub)) {
        queue.push(Node{std::move(sub), std::move(*sol)});
      }
      force_pair(constrained, t, col);
    }
  }
  return out;
}

}  // namespace iplpmb
