#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace mklrate {

/// Eigenvalues below this fraction of the largest are treated as zero when
/// forming ranges and pseudo-inverses.
inline constexpr double kRankTolerance = 1e-10;

/// Number of grid points used to bound sup_x k(x, x).
inline constexpr int kNormalizationGrid = 10001;

enum class Basis {
    /// phi_k(x) = sqrt(2) cos(pi k x), k >= 1, orthonormal and centred
    /// under the uniform law on [0, 1].
    Cosine,
};

std::string_view to_string(Basis basis);

/// Value of the k-th (1-based) basis function. Throws DomainError when x
/// lies outside [0, 1].
double basis_function(Basis basis, int k, double x);

/// A finite-rank Mercer kernel k(x, y) = sum_k mu_k phi_k(x) phi_k(y) on the
/// unit interval.
///
/// The eigenvalues are nonincreasing and positive. When constructed through
/// `power_law` (or `from_eigenvalues` with normalisation on), they are
/// rescaled by a single factor so that max_x k(x, x) over a dense grid is
/// exactly 1.
class SpectralKernel {
public:
    /// mu_k = c k^{-1/s}, k = 1..truncation, then normalised.
    static SpectralKernel power_law(double s, int truncation = 128, double c = 1.0);

    /// Arbitrary nonincreasing positive spectrum. `s` is recorded for
    /// reporting only.
    static SpectralKernel from_eigenvalues(std::vector<double> eigenvalues, double s,
                                           Basis basis = Basis::Cosine, bool normalize = true);

    double s() const noexcept { return s_; }
    int truncation() const noexcept { return static_cast<int>(mu_.size()); }
    std::span<const double> eigenvalues() const noexcept { return mu_; }
    double eigenvalue(int k) const { return mu_.at(static_cast<std::size_t>(k - 1)); }
    Basis basis() const noexcept { return basis_; }
    /// Factor applied to the raw spectrum by normalisation (1 if none).
    double normalization() const noexcept { return scale_; }

    double phi(int k, double x) const { return basis_function(basis_, k, x); }
    double operator()(double x, double y) const;

    /// max over the normalisation grid of k(x, x).
    double sup_diagonal() const;

private:
    SpectralKernel(std::vector<double> mu, double s, Basis basis, double scale)
        : mu_(std::move(mu)), s_(s), basis_(basis), scale_(scale) {}

    std::vector<double> mu_;
    double s_;
    Basis basis_;
    double scale_;
};

double evaluate_kernel(const SpectralKernel& kernel, double x, double y);

/// n x K matrix of phi_k(coords_i). Rows are filled in parallel.
Eigen::MatrixXd basis_matrix(const SpectralKernel& kernel, const Eigen::Ref<const Eigen::VectorXd>& coords);

/// One kernel's Gram matrix together with its spectral factorisation
/// K = U diag(d) U^T, restricted to eigenvalues above the rank tolerance.
/// `dense` may be empty when the block was assembled in factored form.
struct GramBlock {
    Eigen::MatrixXd dense;
    Eigen::MatrixXd eigenvectors;  ///< n x r, orthonormal columns
    Eigen::VectorXd eigenvalues;   ///< r, nonincreasing, > 0
    double min_eigenvalue = 0.0;   ///< smallest eigenvalue before truncation

    Eigen::Index size() const noexcept { return eigenvectors.rows(); }
    Eigen::Index rank() const noexcept { return eigenvectors.cols(); }
    bool has_dense() const noexcept { return dense.size() > 0; }

    /// The n x n matrix; reconstructed from the factorisation when no dense
    /// copy is held.
    Eigen::MatrixXd matrix() const;
    /// K v without materialising K.
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    Eigen::VectorXd diagonal() const;
};

/// Builds the spectral factor of a symmetric PSD matrix. Throws
/// NumericalError (with matrix diagnostics) if the eigensolver fails.
GramBlock factorize_gram(Eigen::MatrixXd gram);

/// Spectral factor of B B^T from a tall feature matrix B, via thin SVD.
GramBlock factorize_features(const Eigen::Ref<const Eigen::MatrixXd>& features);

class GramSet {
public:
    GramSet() = default;
    GramSet(std::vector<GramBlock> blocks, Eigen::MatrixXd samples);

    std::size_t kernel_count() const noexcept { return blocks_.size(); }
    Eigen::Index sample_count() const noexcept { return samples_.rows(); }
    const GramBlock& block(std::size_t m) const { return blocks_.at(m); }
    std::span<const GramBlock> blocks() const noexcept { return blocks_; }
    const Eigen::MatrixXd& samples() const noexcept { return samples_; }
    /// 1e-10 * trace / n for each block; recorded for consumers that take a
    /// Cholesky factor. The spectral factorisation itself needs no jitter.
    double jitter(std::size_t m) const { return jitter_.at(m); }

    /// Symmetry (1e-10), PSD (lambda_min >= -1e-8 lambda_max) and
    /// diag <= 1 + 1e-10. Throws ContractError naming the failing block.
    void check_invariants() const;

private:
    std::vector<GramBlock> blocks_;
    Eigen::MatrixXd samples_;
    std::vector<double> jitter_;
};

/// Dense assembly, K_m[i][j] = k_m(x_i^(m), x_j^(m)); entries computed in
/// parallel. `samples` is n x M, kernel m reads column m.
GramSet assemble_gram(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples);

/// Single-threaded reference for `assemble_gram`, entry by entry through
/// `evaluate_kernel`.
GramSet assemble_gram_serial(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples);

/// Factored assembly from the K-term feature map; no n x n matrix is formed.
/// Intended for large n.
GramSet assemble_gram_factored(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples);

using KernelFunction = std::function<double(double, double)>;

/// Black-box hook for kernels without a known spectrum.
GramSet assemble_gram(std::span<const KernelFunction> kernels, const Eigen::MatrixXd& samples);

/// Eigenvalues of K / n, nonincreasing. Throws ContractError if `gram` is
/// not square or not symmetric within 1e-10.
std::vector<double> empirical_spectrum(const Eigen::MatrixXd& gram);

/// (mu_k^beta b_k)_k: basis coefficients of T^beta applied to sum b_k phi_k.
std::vector<double> apply_operator_power(const SpectralKernel& kernel, std::span<const double> coefficients,
                                         double beta);

/// L2(Q) squared norm of sum b_k phi_k.
double l2_norm_sq(std::span<const double> coefficients);
/// RKHS squared norm of sum b_k phi_k, i.e. sum b_k^2 / mu_k.
double rkhs_norm_sq(const SpectralKernel& kernel, std::span<const double> coefficients);

}  // namespace mklrate
