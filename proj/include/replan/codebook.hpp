#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "replan/geometry.hpp"

namespace replan {

struct TokenPair {
  int x = 0;
  int y = 0;
};

inline bool operator==(TokenPair a, TokenPair b) { return a.x == b.x && a.y == b.y; }

// Waypoints at t = dt, 2*dt, ..., N*dt. The pose at t = 0 is the ego origin
// and is not stored.
struct ContinuousTrajectory {
  std::vector<Vec2> waypoints;
  double dt = 0.25;
};

// Interleaved token sequence x0, y0, x1, y1, ... of length 2N.
struct TokenTrajectory {
  std::vector<int> tokens;
  int horizon_N = 0;
  double dt = 0.25;
};

// Uniform scalar quantizer shared by both coordinate axes: token k maps to
// -half_range + k * cell.
class Codebook {
 public:
  Codebook(double half_range, double cell) : half_range_(half_range), cell_(cell) {
    if (!(half_range > 0.0) || !(cell > 0.0))
      throw std::invalid_argument("codebook: half_range and cell must be positive");
    vocab_ = static_cast<int>(std::floor(2.0 * half_range / cell + 1e-9)) + 1;
  }

  int vocab_size() const { return vocab_; }
  double half_range() const { return half_range_; }
  double cell() const { return cell_; }

  double token_value(int token) const {
    if (token < 0 || token >= vocab_) throw std::out_of_range("token outside vocabulary");
    return -half_range_ + cell_ * token;
  }

  // Nearest grid value; exact ties resolve toward the smaller index, values
  // beyond the range clamp to the outermost tokens.
  int quantize_value(double v) const {
    if (!std::isfinite(v)) throw std::invalid_argument("quantize: non-finite coordinate");
    const double u = (v + half_range_) / cell_;
    const int lo = std::clamp(static_cast<int>(std::floor(u)), 0, vocab_ - 1);
    const int hi = std::min(lo + 1, vocab_ - 1);
    const double d_lo = std::abs(v - token_value(lo));
    const double d_hi = std::abs(v - token_value(hi));
    return d_hi < d_lo ? hi : lo;
  }

  TokenPair quantize_point(Vec2 p) const { return {quantize_value(p.x), quantize_value(p.y)}; }
  Vec2 dequantize_point(TokenPair t) const { return {token_value(t.x), token_value(t.y)}; }

  TokenTrajectory quantize(const ContinuousTrajectory& traj) const {
    TokenTrajectory out;
    out.horizon_N = static_cast<int>(traj.waypoints.size());
    out.dt = traj.dt;
    out.tokens.reserve(traj.waypoints.size() * 2);
    for (const Vec2& p : traj.waypoints) {
      out.tokens.push_back(quantize_value(p.x));
      out.tokens.push_back(quantize_value(p.y));
    }
    return out;
  }

  ContinuousTrajectory dequantize(const TokenTrajectory& traj) const {
    validate(traj);
    ContinuousTrajectory out;
    out.dt = traj.dt;
    out.waypoints.reserve(traj.horizon_N);
    for (int j = 0; j < traj.horizon_N; ++j)
      out.waypoints.push_back(
          {token_value(traj.tokens[2 * j]), token_value(traj.tokens[2 * j + 1])});
    return out;
  }

  void validate(const TokenTrajectory& traj) const {
    if (traj.horizon_N <= 0) throw std::invalid_argument("token trajectory: empty horizon");
    if (static_cast<int>(traj.tokens.size()) != 2 * traj.horizon_N)
      throw std::invalid_argument("token trajectory: length != 2N");
    for (int tok : traj.tokens)
      if (tok < 0 || tok >= vocab_)
        throw std::invalid_argument("token trajectory: token outside vocabulary");
  }

 private:
  double half_range_;
  double cell_;
  int vocab_;
};

}  // namespace replan
