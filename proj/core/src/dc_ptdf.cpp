#include "gridsens/dc_ptdf.hpp"

#include "gridsens/errors.hpp"

#include <queue>
#include <string>
#include <vector>

namespace gridsens {
namespace {

// Buses not connected to the slack through any branch.
std::vector<Index> unreachable_buses(const Network& net) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(net.n_buses()));
  for (const auto& b : net.branches()) {
    adj[static_cast<std::size_t>(b.from)].push_back(b.to);
    adj[static_cast<std::size_t>(b.to)].push_back(b.from);
  }
  std::vector<bool> seen(adj.size(), false);
  std::queue<Index> frontier;
  frontier.push(net.slack());
  seen[static_cast<std::size_t>(net.slack())] = true;
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index v : adj[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        frontier.push(v);
      }
  }
  std::vector<Index> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) out.push_back(static_cast<Index>(i));
  return out;
}

std::string bus_list(const std::vector<Index>& buses) {
  std::string s;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(buses[i] + 1);
  }
  return s;
}

}  // namespace

Matrix build_incidence(const Network& net) {
  Matrix a = Matrix::Zero(net.n_branches(), net.n_buses());
  for (Index i = 0; i < net.n_branches(); ++i) {
    const auto& b = net.branches()[static_cast<std::size_t>(i)];
    a(i, b.from) = 1.0;
    a(i, b.to) = -1.0;
  }
  return a;
}

SensitivityMatrix compute_dc_ptdf(const Network& net) {
  if (const auto lost = unreachable_buses(net); !lost.empty())
    throw ModelError("disconnected network: buses {" + bus_list(lost) +
                     "} cannot reach slack bus " + std::to_string(net.slack() + 1));

  const Index n = net.n_buses();
  const Index l = net.n_branches();
  const Index s = net.slack();
  const Matrix a = build_incidence(net);
  Vector inv_x(l);
  for (Index i = 0; i < l; ++i) inv_x(i) = 1.0 / net.branches()[static_cast<std::size_t>(i)].reactance;

  // Drop the slack column: A_r is l x (n-1).
  Matrix a_r(l, n - 1);
  for (Index j = 0, c = 0; j < n; ++j)
    if (j != s) a_r.col(c++) = a.col(j);

  const Matrix b_r = a_r.transpose() * inv_x.asDiagonal() * a_r;
  Eigen::FullPivLU<Matrix> lu(b_r);
  if (!lu.isInvertible())
    throw ModelError("disconnected network: reduced susceptance matrix is singular");

  const Matrix theta = lu.solve(Matrix::Identity(n - 1, n - 1));
  const Matrix h_r = inv_x.asDiagonal() * a_r * theta;

  SensitivityMatrix out{Matrix::Zero(l, n)};
  for (Index j = 0, c = 0; j < n; ++j)
    if (j != s) out.h.col(j) = h_r.col(c++);
  if (!out.h.allFinite()) throw NumericalError("non-finite PTDF entries");
  return out;
}

}  // namespace gridsens
