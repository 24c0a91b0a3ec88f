#include "mmiq/interference.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <string>

#include "mmiq/errors.hpp"

namespace mmiq {

ModePair make_mode_pair(int first, int second) {
  if (first < 1 || second <= first)
    throw ValidationError("mode pair (" + std::to_string(first) + ", " + std::to_string(second) +
                          ") must satisfy 1 <= first < second");
  return {first, second};
}

std::vector<ModePair> lexicographic_pairs(int n_modes) {
  std::vector<ModePair> pairs;
  for (int a = 1; a <= n_modes; ++a)
    for (int b = a + 1; b <= n_modes; ++b) pairs.push_back({a, b});
  return pairs;
}

Complex permanent(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols()) throw ShapeError("permanent needs a square matrix");
  const int n = static_cast<int>(a.rows());
  if (n > kMaxPermanentSize)
    throw SizeLimitError("permanent limited to n <= " + std::to_string(kMaxPermanentSize));
  if (n == 0) return {1.0, 0.0};

  // Row sums start centred on half the row total, which halves the subset
  // count and keeps the partial sums small.
  std::vector<Complex> sums(n);
  for (int i = 0; i < n; ++i) sums[i] = a(i, n - 1) - 0.5 * a.row(i).sum();

  auto row_product = [&] {
    Complex p = sums[0];
    for (int i = 1; i < n; ++i) p *= sums[i];
    return p;
  };

  Complex total = row_product();
  const std::uint64_t subsets = std::uint64_t{1} << (n - 1);
  double sign = 1.0;
  for (std::uint64_t g = 1; g < subsets; ++g) {
    const int j = std::countr_zero(g);
    const bool added = ((g ^ (g >> 1)) >> j) & 1U;
    for (int i = 0; i < n; ++i) sums[i] += added ? a(i, j) : -a(i, j);
    sign = -sign;
    total += sign * row_product();
  }
  return ((n - 1) % 2 == 0 ? 2.0 : -2.0) * total;
}

Complex permanent_bruteforce(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols()) throw ShapeError("permanent needs a square matrix");
  const int n = static_cast<int>(a.rows());
  if (n > kMaxBruteforceSize)
    throw SizeLimitError("brute-force permanent limited to n <= " +
                         std::to_string(kMaxBruteforceSize));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Complex total{0.0, 0.0};
  do {
    Complex term{1.0, 0.0};
    for (int i = 0; i < n; ++i) term *= a(i, perm[i]);
    total += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

namespace {

void check_pairs(const TransitionMatrix& m, ModePair inputs, ModePair outputs) {
  if (inputs.first < 1 || inputs.second > m.n_inputs() || inputs.first >= inputs.second)
    throw IndexError("input pair out of range for " + std::to_string(m.n_inputs()) + " inputs");
  if (outputs.first < 1 || outputs.second > m.n_outputs() || outputs.first >= outputs.second)
    throw IndexError("output pair out of range for " + std::to_string(m.n_outputs()) +
                     " outputs");
}

detail::Coincidence pair_coincidence(const TransitionMatrix& m, ModePair in, ModePair out) {
  check_pairs(m, in, out);
  return detail::coincidence(m.entries(), in.first - 1, in.second - 1, out.first - 1,
                             out.second - 1);
}

}  // namespace

double quantum_coincidence(const TransitionMatrix& m, ModePair inputs, ModePair outputs) {
  return pair_coincidence(m, inputs, outputs).quantum;
}

double classical_coincidence(const TransitionMatrix& m, ModePair inputs, ModePair outputs) {
  return pair_coincidence(m, inputs, outputs).classical;
}

std::optional<double> visibility(const TransitionMatrix& m, ModePair inputs, ModePair outputs,
                                 double c_min) {
  const auto c = pair_coincidence(m, inputs, outputs);
  if (!(c.classical > c_min)) return std::nullopt;
  return (c.classical - c.quantum) / c.classical;
}

VisibilityMatrix::VisibilityMatrix(std::vector<ModePair> input_pairs,
                                   std::vector<ModePair> output_pairs)
    : input_pairs_(std::move(input_pairs)),
      output_pairs_(std::move(output_pairs)),
      values_(Eigen::MatrixXd::Zero(input_pairs_.size(), output_pairs_.size())),
      defined_(decltype(defined_)::Zero(input_pairs_.size(), output_pairs_.size())) {}

std::optional<double> VisibilityMatrix::at(int row, int col) const {
  if (row < 0 || row >= rows() || col < 0 || col >= cols())
    throw IndexError("visibility cell out of range");
  if (!defined_(row, col)) return std::nullopt;
  return values_(row, col);
}

void VisibilityMatrix::set(int row, int col, std::optional<double> v) {
  if (row < 0 || row >= rows() || col < 0 || col >= cols())
    throw IndexError("visibility cell out of range");
  defined_(row, col) = v.has_value() ? 1 : 0;
  values_(row, col) = v.value_or(0.0);
}

namespace {

int modes_for_pairs(const std::vector<ModePair>& pairs) {
  int n = 0;
  for (const auto& p : pairs) n = std::max(n, p.second);
  return n;
}

}  // namespace

int VisibilityMatrix::n_input_modes() const { return modes_for_pairs(input_pairs_); }
int VisibilityMatrix::n_output_modes() const { return modes_for_pairs(output_pairs_); }

VisibilityMatrix visibility_matrix(const TransitionMatrix& m, double c_min) {
  if (m.n_inputs() < 2 || m.n_outputs() < 2)
    throw ShapeError("visibility matrix needs at least two inputs and two outputs");
  VisibilityMatrix v(lexicographic_pairs(m.n_inputs()), lexicographic_pairs(m.n_outputs()));
  for (int r = 0; r < v.rows(); ++r)
    for (int c = 0; c < v.cols(); ++c)
      v.set(r, c, visibility(m, v.input_pairs()[r], v.output_pairs()[c], c_min));
  return v;
}

int PhotonConfiguration::total_photons() const {
  return std::accumulate(occupations.begin(), occupations.end(), 0);
}

PhotonConfiguration make_configuration(std::vector<int> occupations) {
  for (int o : occupations)
    if (o < 0) throw ValidationError("occupation numbers must be non-negative");
  PhotonConfiguration c{std::move(occupations)};
  if (c.total_photons() < 1) throw ValidationError("configuration needs at least one photon");
  return c;
}

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Mode index repeated by its occupation: [0,2,1] -> {1,1,2}.
std::vector<int> expand(const std::vector<int>& occupations) {
  std::vector<int> modes;
  for (std::size_t k = 0; k < occupations.size(); ++k)
    for (int r = 0; r < occupations[k]; ++r) modes.push_back(static_cast<int>(k));
  return modes;
}

// Every way to place n photons in `modes` modes, lexicographically ascending.
void enumerate_configurations(int modes, int n, std::vector<int>& current, int mode,
                              std::vector<std::vector<int>>& out) {
  if (mode == modes - 1) {
    current[mode] = n;
    out.push_back(current);
    return;
  }
  for (int k = 0; k <= n; ++k) {
    current[mode] = k;
    enumerate_configurations(modes, n - k, current, mode + 1, out);
  }
}

}  // namespace

std::map<PhotonConfiguration, double> output_distribution(const TransitionMatrix& m,
                                                          const PhotonConfiguration& input,
                                                          Statistics statistics) {
  if (static_cast<int>(input.occupations.size()) != m.n_inputs())
    throw ShapeError("input configuration has " + std::to_string(input.occupations.size()) +
                     " modes, matrix has " + std::to_string(m.n_inputs()) + " inputs");
  const int n = input.total_photons();
  if (n < 1) throw ValidationError("input configuration needs at least one photon");
  if (n > kMaxDistributionPhotons)
    throw SizeLimitError("output distribution limited to " +
                         std::to_string(kMaxDistributionPhotons) + " photons, got " +
                         std::to_string(n));
  for (int o : input.occupations)
    if (o < 0) throw ValidationError("occupation numbers must be non-negative");

  const auto rows = expand(input.occupations);
  double input_norm = 1.0;
  for (int s : input.occupations) input_norm *= factorial(s);

  std::vector<std::vector<int>> outputs;
  std::vector<int> scratch(m.n_outputs(), 0);
  enumerate_configurations(m.n_outputs(), n, scratch, 0, outputs);

  const Eigen::MatrixXd intensity = m.entries().cwiseAbs2();
  std::map<PhotonConfiguration, double> dist;
  Eigen::MatrixXcd sub(n, n);
  for (const auto& t : outputs) {
    const auto cols = expand(t);
    double output_norm = 1.0;
    for (int o : t) output_norm *= factorial(o);
    double p = 0.0;
    if (statistics == Statistics::quantum) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) sub(a, b) = m.entries()(rows[a], cols[b]);
      p = std::norm(permanent(sub)) / (input_norm * output_norm);
    } else {
      // Labelled photons travel independently; only identical output slots
      // are over-counted by the permanent.
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) sub(a, b) = intensity(rows[a], cols[b]);
      p = permanent(sub).real() / output_norm;
    }
    dist.emplace(PhotonConfiguration{t}, p);
  }
  return dist;
}

}  // namespace mmiq
