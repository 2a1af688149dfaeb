#pragma once

#include "las/beam.hpp"

#include <fstream>
#include <iomanip>

namespace las {

/// Writes a greedy-decode alignment as CSV: one labeled row per output
/// character, one column per encoder step. Rows are attention weights and
/// therefore row-stochastic.
template <typename Scalar>
void write_attention_csv(const std::string& path,
                         const GreedyTrace<Scalar>& trace,
                         const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  const int u = trace.attention.empty()
                    ? 0
                    : static_cast<int>(trace.attention.front().size());
  out << "char";
  for (int c = 0; c < u; ++c) out << ",u" << c;
  out << "\n";
  out << std::setprecision(17);
  for (std::size_t r = 0; r < trace.attention.size(); ++r) {
    out << vocab.symbol(trace.tokens[r]);
    for (int c = 0; c < u; ++c) out << "," << trace.attention[r](c);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

/// Fraction of adjacent output steps whose attention argmax does not move
/// backwards. 1.0 for a single-row (or empty) alignment.
inline double attention_monotonicity(
    const std::vector<Eigen::VectorXd>& attention) {
  if (attention.size() < 2) return 1.0;
  int ok = 0;
  auto argmax = [](const Eigen::VectorXd& v) {
    Eigen::Index i;
    v.maxCoeff(&i);
    return i;
  };
  for (std::size_t r = 1; r < attention.size(); ++r)
    if (argmax(attention[r]) >= argmax(attention[r - 1])) ++ok;
  return static_cast<double>(ok) / (attention.size() - 1);
}

}  // namespace las
