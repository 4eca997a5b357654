#pragma once

// Seeded synthetic drifting classification streams (kinds A-F).
//
// Every generator is a pure function of (spec, t, seed). Class centroids move
// with a drift period T; kinds A-E repeat exactly every T steps, kind F
// expands its circumradius linearly and never repeats.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace komet {

enum class DriftKind { A_sign_flip, B_osc_sep, C_lissajous, D_orbit_mog, E_subcluster_mog, F_expanding };

/// Single-letter id ("A".."F").
std::string_view kind_letter(DriftKind kind);
DriftKind kind_from_string(std::string_view s);

struct DriftSpec {
  DriftKind kind = DriftKind::A_sign_flip;
  int period = 100;
  int total_steps = 400;
  int n_classes = 2;
  int input_dim = 2;
  double noise_std = 0.25;
  // Kind-specific named scalars (radius, sep_mean, amp_x, ...). Overridable
  // from the run config as dataset.<name>.
  std::map<std::string, double> params;

  static DriftSpec defaults(DriftKind kind);

  double param(const std::string& name) const;
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// One Gaussian mixture component of the class-conditional law at time t.
struct MixtureComponent {
  Eigen::Vector2d mean;
  int label = 0;
  double weight = 1.0;  // relative weight within its class
};

struct LabeledBatch {
  Eigen::MatrixX2d inputs;
  Eigen::VectorXi labels;
  int timestep = 0;

  Eigen::Index size() const { return labels.size(); }
};

std::vector<MixtureComponent> mixture(const DriftSpec& spec, int t);

/// Class centroids at t; for kind E one entry per sub-cluster
/// (class k owns entries 2k and 2k+1).
std::vector<Eigen::Vector2d> centroids(const DriftSpec& spec, int t);

/// Circumradius of the class triangle (kinds D-F).
double circumradius(const DriftSpec& spec, int t);

/// Inter-class gap sqrt(3) * R(t) for the equilateral-triangle kinds D-F.
double gap(const DriftSpec& spec, int t);

/// Named RNG streams; training and test never share draws.
enum class Stream : std::uint64_t { train = 0x7472616eULL, test = 0x74657374ULL, init = 0x696e6974ULL };

std::uint64_t stream_seed(std::uint64_t seed, DriftKind kind, Stream stream, int t);

/// n i.i.d. draws, labels assigned round-robin so classes stay balanced.
LabeledBatch sample_timestep(const DriftSpec& spec, int t, int n, std::uint64_t seed,
                             Stream stream = Stream::train);

/// Exact Bayes-optimal label for a point at time t (maximum likelihood under
/// the generating mixture). Used as a test oracle.
int bayes_label(const DriftSpec& spec, int t, const Eigen::Vector2d& x);

}  // namespace komet
