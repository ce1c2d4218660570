/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ENOS_ENERGY_HPP
#define ENOS_ENERGY_HPP

#include <array>
#include <fstream>
#include <optional>

#include "enos/operators.hpp"
#include "enos/tensor.hpp"

namespace enos {

// Compute mode of a layer assignment: 8-bit digital datapath or 4-bit
// compute-in-memory array.
enum class Mode { Digital8, CiM4 };

inline const char* mode_name(Mode m) { return m == Mode::Digital8 ? "Digital8" : "CiM4"; }

inline std::optional<Mode> mode_from_name(const std::string& s) {
  if (s == "Digital8" || s == "digital" || s == "D") return Mode::Digital8;
  if (s == "CiM4" || s == "cim" || s == "C") return Mode::CiM4;
  return std::nullopt;
}

struct OperatorChoice {
  OperatorKind op = OperatorKind::Typical;
  Mode mode = Mode::Digital8;
  bool operator==(const OperatorChoice&) const = default;
};

// Compact token used in assignment files and CSV cells: "T", "MF", "B" for
// digital; "T+cim", "MF+cim", "B+cim" for compute-in-memory.
inline std::string choice_token(const OperatorChoice& c) {
  std::string s = op_name(c.op);
  if (c.mode == Mode::CiM4) s += "+cim";
  return s;
}

inline OperatorChoice parse_choice_token(const std::string& tok) {
  std::string opstr = tok;
  Mode mode = Mode::Digital8;
  if (auto p = tok.find("+cim"); p != std::string::npos && p + 4 == tok.size()) {
    opstr = tok.substr(0, p);
    mode = Mode::CiM4;
  }
  auto op = op_from_name(opstr);
  if (!op) throw std::invalid_argument("unknown assignment token '" + tok + "'");
  return {*op, mode};
}

inline std::vector<OperatorChoice> digital_choices() {
  return {{OperatorKind::Typical, Mode::Digital8},
          {OperatorKind::MultiplicationFree, Mode::Digital8},
          {OperatorKind::Binary, Mode::Digital8}};
}

inline std::vector<OperatorChoice> hybrid_choices() {
  return {{OperatorKind::Typical, Mode::Digital8},
          {OperatorKind::MultiplicationFree, Mode::Digital8},
          {OperatorKind::Binary, Mode::Digital8},
          {OperatorKind::Typical, Mode::CiM4},
          {OperatorKind::MultiplicationFree, Mode::CiM4},
          {OperatorKind::Binary, Mode::CiM4}};
}

// Per-(operator, mode) cost constants: energy per MAC in femtojoules and
// CiM weight-storage footprint in bits per weight (zero for digital).
struct EnergyTable {
  std::array<std::array<double, 2>, 3> energy_fj{};
  std::array<std::array<double, 2>, 3> area_bits{};
  std::array<std::array<bool, 2>, 3> present{};

  static int oi(OperatorKind k) { return static_cast<int>(k); }
  static int mi(Mode m) { return static_cast<int>(m); }

  void set(OperatorChoice c, double e_fj, double a_bits) {
    if (e_fj <= 0.0) throw std::invalid_argument("energy table: energy must be positive");
    if (a_bits < 0.0) throw std::invalid_argument("energy table: area must be non-negative");
    energy_fj[oi(c.op)][mi(c.mode)] = e_fj;
    area_bits[oi(c.op)][mi(c.mode)] = a_bits;
    present[oi(c.op)][mi(c.mode)] = true;
  }
  double energy(OperatorChoice c) const {
    if (!present[oi(c.op)][mi(c.mode)])
      throw std::invalid_argument("energy table: no entry for " + choice_token(c));
    return energy_fj[oi(c.op)][mi(c.mode)];
  }
  double area(OperatorChoice c) const {
    if (!present[oi(c.op)][mi(c.mode)])
      throw std::invalid_argument("energy table: no entry for " + choice_token(c));
    return area_bits[oi(c.op)][mi(c.mode)];
  }

  // 8-bit digital and 4-bit CiM per-op energies from post-synthesis / SPICE
  // characterization at 15 nm; treated as opaque constants here.
  static EnergyTable defaults() {
    EnergyTable t;
    t.set({OperatorKind::Typical, Mode::Digital8}, 295.7, 0.0);
    t.set({OperatorKind::MultiplicationFree, Mode::Digital8}, 64.0, 0.0);
    t.set({OperatorKind::Binary, Mode::Digital8}, 32.0, 0.0);
    t.set({OperatorKind::Typical, Mode::CiM4}, 51.78, 4.0);
    t.set({OperatorKind::MultiplicationFree, Mode::CiM4}, 12.95, 4.0);
    t.set({OperatorKind::Binary, Mode::CiM4}, 6.47, 1.0);
    return t;
  }

  // Lines of "operator,mode,energy_fj,area_bits", e.g. "Typical,Digital8,295.7,0".
  std::string dump() const {
    std::ostringstream os;
    os << "operator,mode,energy_fj,area_bits\n";
    const char* ops[3] = {"Typical", "MF", "Binary"};
    for (int m = 0; m < 2; ++m)
      for (int o = 0; o < 3; ++o)
        if (present[o][m]) {
          os << ops[o] << ',' << (m == 0 ? "Digital8" : "CiM4") << ','
             << energy_fj[o][m] << ',' << area_bits[o][m] << '\n';
        }
    return os.str();
  }

  // Parse the dump format, overriding entries on top of *this.
  void load(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      if (lineno == 1 && line.rfind("operator,", 0) == 0) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      if (f.size() != 4)
        throw std::invalid_argument("energy table line " + std::to_string(lineno) +
                                    ": expected operator,mode,energy_fj,area_bits");
      auto op = op_from_name(f[0]);
      auto mode = mode_from_name(f[1]);
      if (!op || !mode)
        throw std::invalid_argument("energy table line " + std::to_string(lineno) +
                                    ": unknown operator or mode '" + f[0] + "," + f[1] + "'");
      set({*op, *mode}, std::stod(f[2]), std::stod(f[3]));
    }
  }

  static EnergyTable from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open energy table '" + path + "'");
    EnergyTable t = defaults();
    t.load(in);
    return t;
  }
};

// Maximum CiM footprint per weight across the table; total network weight-bits
// are counted against this (4 bits/weight with the default table).
inline double max_area_bits(const EnergyTable& t, const std::vector<OperatorChoice>& choices) {
  double a = 0.0;
  for (const auto& c : choices) a = std::max(a, t.area(c));
  return a;
}

struct EnergyReport {
  std::vector<double> per_layer_fj;
  double total_fj = 0.0;
  double normalized = 0.0;  // ratio to the all-Typical-Digital baseline
  double cim_bits = 0.0;
  double budget_bits = -1.0;  // <0 when no budget applies
  bool feasible = true;       // cim_bits <= budget when a budget is set
};

// All-Typical-Digital energy of the network; the normalization baseline.
inline double baseline_energy(const std::vector<long>& n_ops, const EnergyTable& table) {
  double e = table.energy({OperatorKind::Typical, Mode::Digital8});
  double s = 0.0;
  for (long n : n_ops) {
    if (n <= 0) throw std::invalid_argument("baseline_energy: N_OP must be positive");
    s += static_cast<double>(n) * e;
  }
  return s;
}

// Differentiable expected energy: sum_i N_OP,i * sum_j softmax(alpha_ij) E_OP,j.
inline Tensor expected_energy(const std::vector<Tensor>& alphas, const std::vector<long>& n_ops,
                              const std::vector<OperatorChoice>& choices,
                              const EnergyTable& table) {
  if (alphas.size() != n_ops.size())
    throw std::invalid_argument("expected_energy: " + std::to_string(alphas.size()) +
                                " alphas vs " + std::to_string(n_ops.size()) + " layer counts");
  std::vector<double> e(choices.size());
  for (std::size_t j = 0; j < choices.size(); ++j) e[j] = table.energy(choices[j]);
  Tensor total = scalar(0.0);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i]->size() != choices.size())
      throw std::invalid_argument("expected_energy: alpha length " +
                                  std::to_string(alphas[i]->size()) + " vs " +
                                  std::to_string(choices.size()) + " choices");
    std::vector<double> coeff(e);
    for (double& x : coeff) x *= static_cast<double>(n_ops[i]);
    total = add(total, dot_const(softmax(alphas[i]), std::move(coeff)));
  }
  return total;
}

// Differentiable expected CiM usage: sum_i N_W,i * sum_j softmax(alpha_ij) A_j.
inline Tensor expected_cim_usage(const std::vector<Tensor>& alphas, const std::vector<long>& n_ws,
                                 const std::vector<OperatorChoice>& choices,
                                 const EnergyTable& table) {
  if (alphas.size() != n_ws.size())
    throw std::invalid_argument("expected_cim_usage: alpha/layer count mismatch");
  std::vector<double> a(choices.size());
  for (std::size_t j = 0; j < choices.size(); ++j) a[j] = table.area(choices[j]);
  Tensor total = scalar(0.0);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    std::vector<double> coeff(a);
    for (double& x : coeff) x *= static_cast<double>(n_ws[i]);
    total = add(total, dot_const(softmax(alphas[i]), std::move(coeff)));
  }
  return total;
}

inline double assignment_cim_usage(const std::vector<OperatorChoice>& assignment,
                                   const std::vector<long>& n_ws, const EnergyTable& table) {
  if (assignment.size() != n_ws.size())
    throw std::invalid_argument("assignment_cim_usage: assignment/layer count mismatch");
  double bits = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    bits += table.area(assignment[i]) * static_cast<double>(n_ws[i]);
  return bits;
}

inline EnergyReport assignment_energy(const std::vector<OperatorChoice>& assignment,
                                      const std::vector<long>& n_ops,
                                      const std::vector<long>& n_ws, const EnergyTable& table,
                                      double budget_bits = -1.0) {
  if (assignment.size() != n_ops.size() || assignment.size() != n_ws.size())
    throw std::invalid_argument("assignment_energy: assignment/layer count mismatch");
  EnergyReport r;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    double e = static_cast<double>(n_ops[i]) * table.energy(assignment[i]);
    r.per_layer_fj.push_back(e);
    r.total_fj += e;
  }
  r.normalized = assignment.empty() ? 0.0 : r.total_fj / baseline_energy(n_ops, table);
  r.cim_bits = assignment_cim_usage(assignment, n_ws, table);
  r.budget_bits = budget_bits;
  r.feasible = budget_bits < 0.0 || r.cim_bits <= budget_bits;
  return r;
}

// gamma * (B - expected_usage)^2, the soft CiM-capacity penalty.
inline Tensor lagrangian_penalty(double gamma, double budget_bits, const Tensor& expected_usage) {
  if (gamma < 0.0) throw std::invalid_argument("lagrangian_penalty: gamma must be >= 0");
  if (budget_bits < 0.0) throw std::invalid_argument("lagrangian_penalty: budget must be >= 0");
  if (gamma == 0.0) return scalar(0.0);
  Tensor diff = sub(scalar(budget_bits), expected_usage);
  return scale(mul(diff, diff), gamma);
}

// Full search loss: accuracy loss + lambda * normalized expected energy
// (+ the Lagrangian CiM term when gamma > 0).
inline Tensor total_loss(const Tensor& acc_loss, const std::vector<Tensor>& alphas,
                         const std::vector<long>& n_ops, const std::vector<long>& n_ws,
                         double lambda, double gamma, double budget_bits,
                         const std::vector<OperatorChoice>& choices, const EnergyTable& table) {
  if (lambda < 0.0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  Tensor loss = acc_loss;
  if (lambda > 0.0 && !alphas.empty()) {
    double base = baseline_energy(n_ops, table);
    loss = add(loss, scale(expected_energy(alphas, n_ops, choices, table), lambda / base));
  }
  if (gamma > 0.0 && !alphas.empty())
    loss = add(loss, lagrangian_penalty(gamma, budget_bits,
                                        expected_cim_usage(alphas, n_ws, choices, table)));
  return loss;
}

}  // namespace enos

#endif  // ENOS_ENERGY_HPP
