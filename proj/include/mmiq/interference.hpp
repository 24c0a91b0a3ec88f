#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mmiq/core.hpp"

namespace mmiq {

/// Visibility is undefined where the classical coincidence probability is
/// at or below this value.
inline constexpr double kDefaultCMin = 1e-9;

inline constexpr int kMaxPermanentSize = 30;
inline constexpr int kMaxBruteforceSize = 9;
inline constexpr int kMaxDistributionPhotons = 6;

/// Ordered pair of distinct 1-based mode labels, first < second.
struct ModePair {
  int first = 1;
  int second = 2;

  auto operator<=>(const ModePair&) const = default;
};

ModePair make_mode_pair(int first, int second);

/// All pairs over `n_modes` modes in lexicographic order:
/// (1,2), (1,3), ..., (1,n), (2,3), ...
std::vector<ModePair> lexicographic_pairs(int n_modes);

/// Ryser's formula in the Nijenhuis-Wilf form with Gray-code row sums.
Complex permanent(const Eigen::MatrixXcd& a);

/// Sum over all n! permutations. Only meant as a cross-check.
Complex permanent_bruteforce(const Eigen::MatrixXcd& a);

/// Probability that indistinguishable photons entering `inputs` leave one
/// in each of `outputs`.
double quantum_coincidence(const TransitionMatrix& m, ModePair inputs, ModePair outputs);

/// Same event for distinguishable photons: no cross term.
double classical_coincidence(const TransitionMatrix& m, ModePair inputs, ModePair outputs);

/// (C - Q) / C, or nullopt when C <= c_min. Positive is a dip, negative a peak.
std::optional<double> visibility(const TransitionMatrix& m, ModePair inputs, ModePair outputs,
                                 double c_min = kDefaultCMin);

class VisibilityMatrix {
 public:
  VisibilityMatrix(std::vector<ModePair> input_pairs, std::vector<ModePair> output_pairs);

  const std::vector<ModePair>& input_pairs() const { return input_pairs_; }
  const std::vector<ModePair>& output_pairs() const { return output_pairs_; }
  int rows() const { return static_cast<int>(input_pairs_.size()); }
  int cols() const { return static_cast<int>(output_pairs_.size()); }

  /// 0-based cell access.
  std::optional<double> at(int row, int col) const;
  bool defined(int row, int col) const { return defined_(row, col) != 0; }
  double value(int row, int col) const { return values_(row, col); }
  void set(int row, int col, std::optional<double> v);

  /// Mode-count view of the pair lists, e.g. 4 for 6 pairs.
  int n_input_modes() const;
  int n_output_modes() const;

 private:
  std::vector<ModePair> input_pairs_;
  std::vector<ModePair> output_pairs_;
  Eigen::MatrixXd values_;
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> defined_;
};

/// Full lexicographic grid of two-photon visibilities. Needs N, M >= 2.
VisibilityMatrix visibility_matrix(const TransitionMatrix& m, double c_min = kDefaultCMin);

/// Occupation numbers per mode.
struct PhotonConfiguration {
  std::vector<int> occupations;

  int total_photons() const;
  auto operator<=>(const PhotonConfiguration&) const = default;
};

PhotonConfiguration make_configuration(std::vector<int> occupations);

enum class Statistics { quantum, classical };

/// Exact output distribution for up to kMaxDistributionPhotons photons,
/// keyed by output configuration in lexicographic order.
std::map<PhotonConfiguration, double> output_distribution(const TransitionMatrix& m,
                                                          const PhotonConfiguration& input,
                                                          Statistics statistics);

namespace detail {

struct Coincidence {
  double quantum;
  double classical;
};

/// 0-based two-photon coincidence for inputs (i, j) and outputs (k, l).
inline Coincidence coincidence(const Eigen::MatrixXcd& m, int i, int j, int k, int l) {
  const Complex direct = m(i, k) * m(j, l);
  const Complex exchange = m(i, l) * m(j, k);
  return {std::norm(direct + exchange), std::norm(direct) + std::norm(exchange)};
}

}  // namespace detail

}  // namespace mmiq
