#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlp/systems.hpp"
#include "qlp/types.hpp"

namespace qlp {

/// Independent per-coordinate sampling distribution. Degenerate specs
/// (lo == hi, variance == 0) are point masses.
struct SamplerSpec {
  enum class Kind { uniform, gaussian };

  Kind kind = Kind::uniform;
  double a = 0.0;  // lo (uniform) or mean (gaussian)
  double b = 0.0;  // hi (uniform) or variance (gaussian)
  int dimension = 1;

  static SamplerSpec uniform(double lo, double hi, int dimension);
  static SamplerSpec gaussian(double mean, double variance, int dimension);

  void validate() const;
  /// "uniform(-5,5)" / "gaussian(0,9)"; parse() reads the same form.
  std::string describe() const;
  static SamplerSpec parse(const std::string& text, int dimension);
};

struct Transition {
  VectorXd x;
  VectorXd a;
  VectorXd y;
  double l = 0.0;
};

/// Fixed offline batch of transitions reused by every iteration.
class ReplayBuffer {
 public:
  ReplayBuffer(std::vector<Transition> tuples, std::uint64_t seed,
               SamplerSpec state_sampler, SamplerSpec action_sampler,
               std::size_t resamples = 0, bool anchored = false);

  std::size_t size() const { return tuples_.size(); }
  const Transition& operator[](std::size_t b) const { return tuples_[b]; }
  const std::vector<Transition>& tuples() const { return tuples_; }
  int state_dim() const { return static_cast<int>(tuples_.front().x.size()); }
  int input_dim() const { return static_cast<int>(tuples_.front().a.size()); }
  std::uint64_t seed() const { return seed_; }
  const SamplerSpec& state_sampler() const { return state_sampler_; }
  const SamplerSpec& action_sampler() const { return action_sampler_; }
  /// Draws rejected because the plant or cost returned a non-finite value.
  std::size_t resamples() const { return resamples_; }
  /// Tuple 0 is the equilibrium sample (x, a) = (0, 0) rather than a draw.
  bool anchored() const { return anchored_; }

 private:
  std::vector<Transition> tuples_;
  std::uint64_t seed_;
  SamplerSpec state_sampler_;
  SamplerSpec action_sampler_;
  std::size_t resamples_;
  bool anchored_;
};

/// Draws N state/behavior-action pairs and records one plant step and one
/// cost evaluation for each. Deterministic in `seed`.
///
/// With `anchor_origin`, tuple 0 is the pair (0, 0) passed through the same
/// plant and cost, followed by N - 1 draws. That single row pins the constant
/// term of Q at the regulation target.
ReplayBuffer build_buffer(const Plant& plant, const StageCost& cost,
                          const SamplerSpec& state_sampler,
                          const SamplerSpec& action_sampler, std::size_t n,
                          std::uint64_t seed, bool anchor_origin = false);

class BufferParseError : public std::runtime_error {
 public:
  BufferParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// CSV layout:
///
///   # qlp-buffer seed=<u64> resamples=<k> state=<spec> action=<spec> anchor=<origin|none>
///   index,x1,..,xn,a1,..,am,y1,..,yn,l
///   0,...
///
/// Values are written with 17 significant digits so reading back is exact.
void write_buffer_csv(std::ostream& out, const ReplayBuffer& buffer);
void write_buffer_csv(const std::string& path, const ReplayBuffer& buffer);
ReplayBuffer read_buffer_csv(std::istream& in);
ReplayBuffer read_buffer_csv(const std::string& path);

std::string buffer_csv_header(int state_dim, int input_dim);

}  // namespace qlp
