#include "mklrate/kernel_core.hpp"

#include "mklrate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mklrate {

namespace {

void check_unit_interval(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream os;
        os << "coordinate " << x << " outside [0, 1]";
        throw DomainError(os.str());
    }
}

double raw_sup_diagonal(std::span<const double> mu, Basis basis) {
    double best = 0.0;
    for (int g = 0; g < kNormalizationGrid; ++g) {
        const double x = static_cast<double>(g) / (kNormalizationGrid - 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            const double p = basis_function(basis, static_cast<int>(k) + 1, x);
            acc += mu[k] * (p * p);
        }
        best = std::max(best, acc);
    }
    return best;
}

std::string matrix_diagnostics(const Eigen::MatrixXd& gram) {
    std::ostringstream os;
    os << "n=" << gram.rows() << " trace=" << gram.trace();
    if (gram.size() > 0) {
        os << " diag[min,max]=[" << gram.diagonal().minCoeff() << "," << gram.diagonal().maxCoeff() << "]"
           << " asym=" << (gram - gram.transpose()).cwiseAbs().maxCoeff()
           << " finite=" << (gram.allFinite() ? "yes" : "no");
    }
    return os.str();
}

void check_samples(std::size_t kernel_count, const Eigen::MatrixXd& samples) {
    if (kernel_count == 0) throw ParameterError("kernels", "at least one kernel is required");
    if (samples.rows() < 1) throw ParameterError("samples", "at least one sample is required");
    if (static_cast<std::size_t>(samples.cols()) != kernel_count) {
        std::ostringstream os;
        os << "input arity " << samples.cols() << " does not match kernel count " << kernel_count;
        throw ParameterError("samples", os.str());
    }
}

}  // namespace

std::string_view to_string(Basis basis) {
    switch (basis) {
        case Basis::Cosine: return "cosine";
    }
    return "unknown";
}

double basis_function(Basis basis, int k, double x) {
    check_unit_interval(x);
    if (k < 1) throw ParameterError("k", "basis index is 1-based");
    switch (basis) {
        case Basis::Cosine: return std::numbers::sqrt2 * std::cos(std::numbers::pi * k * x);
    }
    throw ParameterError("basis", "unsupported basis");
}

SpectralKernel SpectralKernel::power_law(double s, int truncation, double c) {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("s", "must lie in (0, 1)");
    if (truncation < 1) throw ParameterError("truncation", "must be positive");
    if (!(c > 0.0)) throw ParameterError("c", "must be positive");
    std::vector<double> mu(static_cast<std::size_t>(truncation));
    for (int k = 1; k <= truncation; ++k) mu[static_cast<std::size_t>(k - 1)] = c * std::pow(k, -1.0 / s);
    return from_eigenvalues(std::move(mu), s, Basis::Cosine, true);
}

SpectralKernel SpectralKernel::from_eigenvalues(std::vector<double> eigenvalues, double s, Basis basis,
                                                bool normalize) {
    if (eigenvalues.empty()) throw ParameterError("eigenvalues", "empty spectrum");
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
        if (!(eigenvalues[k] > 0.0) || !std::isfinite(eigenvalues[k]))
            throw ParameterError("eigenvalues", "must be finite and positive");
        if (k > 0 && eigenvalues[k] > eigenvalues[k - 1])
            throw ParameterError("eigenvalues", "must be nonincreasing");
    }
    double scale = 1.0;
    if (normalize) {
        scale = 1.0 / raw_sup_diagonal(eigenvalues, basis);
        for (double& m : eigenvalues) m *= scale;
    }
    return SpectralKernel(std::move(eigenvalues), s, basis, scale);
}

double SpectralKernel::operator()(double x, double y) const {
    check_unit_interval(x);
    check_unit_interval(y);
    double acc = 0.0;
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        const int idx = static_cast<int>(k) + 1;
        acc += mu_[k] * (phi(idx, x) * phi(idx, y));
    }
    return acc;
}

double SpectralKernel::sup_diagonal() const { return raw_sup_diagonal(mu_, basis_); }

double evaluate_kernel(const SpectralKernel& kernel, double x, double y) { return kernel(x, y); }

Eigen::MatrixXd basis_matrix(const SpectralKernel& kernel, const Eigen::Ref<const Eigen::VectorXd>& coords) {
    const Eigen::Index n = coords.size();
    const int K = kernel.truncation();
    for (Eigen::Index i = 0; i < n; ++i) check_unit_interval(coords[i]);
    Eigen::MatrixXd phi(n, K);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) phi(i, k) = kernel.phi(k + 1, coords[i]);
    }
    return phi;
}

Eigen::MatrixXd GramBlock::matrix() const {
    if (has_dense()) return dense;
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

Eigen::VectorXd GramBlock::apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (has_dense()) return dense * v;
    return eigenvectors * (eigenvalues.asDiagonal() * (eigenvectors.transpose() * v));
}

Eigen::VectorXd GramBlock::diagonal() const {
    if (has_dense()) return dense.diagonal();
    return eigenvectors.array().square().matrix() * eigenvalues;
}

GramBlock factorize_gram(Eigen::MatrixXd gram) {
    if (gram.rows() != gram.cols()) throw ContractError("Gram matrix must be square");
    GramBlock block;
    const Eigen::Index n = gram.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite())
        throw NumericalError("symmetric eigendecomposition failed: " + matrix_diagnostics(gram));

    // Eigen returns ascending order.
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double top = n > 0 ? values[n - 1] : 0.0;
    block.min_eigenvalue = n > 0 ? values[0] : 0.0;
    Eigen::Index rank = 0;
    if (top > 0.0) {
        for (Eigen::Index j = n - 1; j >= 0 && values[j] > kRankTolerance * top; --j) ++rank;
    }
    block.eigenvectors.resize(n, rank);
    block.eigenvalues.resize(rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
        block.eigenvalues[r] = values[n - 1 - r];
        block.eigenvectors.col(r) = eig.eigenvectors().col(n - 1 - r);
    }
    block.dense = std::move(gram);
    return block;
}

GramBlock factorize_features(const Eigen::Ref<const Eigen::MatrixXd>& features) {
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    GramBlock block;

    Eigen::MatrixXd left;
    Eigen::VectorXd sigma;
    if (n > p) {
        // Thin QR first so the SVD only sees a p x p factor.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(features);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU);
        if (svd.info() != Eigen::Success) throw NumericalError("SVD of feature factor failed");
        left = qr.householderQ() * (Eigen::MatrixXd::Identity(n, p) * svd.matrixU());
        sigma = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(features, Eigen::ComputeThinU);
        if (svd.info() != Eigen::Success) throw NumericalError("SVD of feature factor failed");
        left = svd.matrixU();
        sigma = svd.singularValues();
    }
    if (!sigma.allFinite()) throw NumericalError("non-finite singular values in feature factor");

    const double top = sigma.size() > 0 ? sigma[0] * sigma[0] : 0.0;
    Eigen::Index rank = 0;
    if (top > 0.0) {
        while (rank < sigma.size() && sigma[rank] * sigma[rank] > kRankTolerance * top) ++rank;
    }
    block.eigenvectors = left.leftCols(rank);
    block.eigenvalues = sigma.head(rank).array().square().matrix();
    return block;
}

GramSet::GramSet(std::vector<GramBlock> blocks, Eigen::MatrixXd samples)
    : blocks_(std::move(blocks)), samples_(std::move(samples)) {
    jitter_.reserve(blocks_.size());
    for (const auto& b : blocks_) {
        const double trace = b.has_dense() ? b.dense.trace() : b.eigenvalues.sum();
        const auto n = std::max<Eigen::Index>(b.size(), 1);
        jitter_.push_back(1e-10 * trace / static_cast<double>(n));
    }
}

void GramSet::check_invariants() const {
    for (std::size_t m = 0; m < blocks_.size(); ++m) {
        const GramBlock& b = blocks_[m];
        const std::string tag = "Gram block " + std::to_string(m) + ": ";
        double top = b.eigenvalues.size() > 0 ? b.eigenvalues[0] : 0.0;
        if (b.has_dense()) {
            const double asym = (b.dense - b.dense.transpose()).cwiseAbs().maxCoeff();
            if (asym > 1e-10) throw ContractError(tag + "asymmetry " + std::to_string(asym));
            if (b.min_eigenvalue < -1e-8 * std::max(top, 0.0))
                throw ContractError(tag + "not PSD, min eigenvalue " + std::to_string(b.min_eigenvalue));
        }
        const Eigen::VectorXd diag = b.diagonal();
        if (diag.size() > 0 && diag.maxCoeff() > 1.0 + 1e-10)
            throw ContractError(tag + "diagonal exceeds 1: " + std::to_string(diag.maxCoeff()));
    }
}

GramSet assemble_gram(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples) {
    check_samples(kernels.size(), samples);
    const Eigen::Index n = samples.rows();
    std::vector<GramBlock> blocks;
    blocks.reserve(kernels.size());
    for (std::size_t m = 0; m < kernels.size(); ++m) {
        const SpectralKernel& kernel = kernels[m];
        const Eigen::MatrixXd phi = basis_matrix(kernel, samples.col(static_cast<Eigen::Index>(m)));
        const auto mu = kernel.eigenvalues();
        const int K = kernel.truncation();
        Eigen::MatrixXd gram(n, n);
#pragma omp parallel for schedule(dynamic, 8)
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                double acc = 0.0;
                for (int k = 0; k < K; ++k) acc += mu[static_cast<std::size_t>(k)] * (phi(i, k) * phi(j, k));
                gram(i, j) = acc;
                gram(j, i) = acc;
            }
        }
        blocks.push_back(factorize_gram(std::move(gram)));
    }
    return GramSet(std::move(blocks), samples);
}

GramSet assemble_gram_serial(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples) {
    check_samples(kernels.size(), samples);
    const Eigen::Index n = samples.rows();
    std::vector<GramBlock> blocks;
    blocks.reserve(kernels.size());
    for (std::size_t m = 0; m < kernels.size(); ++m) {
        const auto col = static_cast<Eigen::Index>(m);
        Eigen::MatrixXd gram(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) gram(i, j) = evaluate_kernel(kernels[m], samples(i, col), samples(j, col));
        blocks.push_back(factorize_gram(std::move(gram)));
    }
    return GramSet(std::move(blocks), samples);
}

GramSet assemble_gram_factored(std::span<const SpectralKernel> kernels, const Eigen::MatrixXd& samples) {
    check_samples(kernels.size(), samples);
    std::vector<GramBlock> blocks;
    blocks.reserve(kernels.size());
    for (std::size_t m = 0; m < kernels.size(); ++m) {
        Eigen::MatrixXd features = basis_matrix(kernels[m], samples.col(static_cast<Eigen::Index>(m)));
        const auto mu = kernels[m].eigenvalues();
        for (Eigen::Index k = 0; k < features.cols(); ++k) features.col(k) *= std::sqrt(mu[static_cast<std::size_t>(k)]);
        blocks.push_back(factorize_features(features));
    }
    return GramSet(std::move(blocks), samples);
}

GramSet assemble_gram(std::span<const KernelFunction> kernels, const Eigen::MatrixXd& samples) {
    check_samples(kernels.size(), samples);
    const Eigen::Index n = samples.rows();
    std::vector<GramBlock> blocks;
    blocks.reserve(kernels.size());
    for (std::size_t m = 0; m < kernels.size(); ++m) {
        const auto col = static_cast<Eigen::Index>(m);
        Eigen::MatrixXd gram(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) gram(i, j) = gram(j, i) = kernels[m](samples(i, col), samples(j, col));
        blocks.push_back(factorize_gram(std::move(gram)));
    }
    return GramSet(std::move(blocks), samples);
}

std::vector<double> empirical_spectrum(const Eigen::MatrixXd& gram) {
    if (gram.rows() != gram.cols()) throw ContractError("empirical_spectrum: matrix is not square");
    const Eigen::Index n = gram.rows();
    if (n == 0) return {};
    const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
    if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ContractError("empirical_spectrum: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram / static_cast<double>(n), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("empirical_spectrum: eigensolver failed");
    std::vector<double> out(eig.eigenvalues().data(), eig.eigenvalues().data() + n);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<double> apply_operator_power(const SpectralKernel& kernel, std::span<const double> coefficients,
                                         double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("beta", "must lie in [0, 1]");
    if (coefficients.size() > static_cast<std::size_t>(kernel.truncation()))
        throw ParameterError("coefficients", "longer than the kernel truncation");
    const auto mu = kernel.eigenvalues();
    std::vector<double> out(coefficients.size());
    for (std::size_t k = 0; k < coefficients.size(); ++k) out[k] = std::pow(mu[k], beta) * coefficients[k];
    return out;
}

double l2_norm_sq(std::span<const double> coefficients) {
    double acc = 0.0;
    for (double b : coefficients) acc += b * b;
    return acc;
}

double rkhs_norm_sq(const SpectralKernel& kernel, std::span<const double> coefficients) {
    if (coefficients.size() > static_cast<std::size_t>(kernel.truncation()))
        throw ParameterError("coefficients", "longer than the kernel truncation");
    const auto mu = kernel.eigenvalues();
    double acc = 0.0;
    for (std::size_t k = 0; k < coefficients.size(); ++k) acc += coefficients[k] * coefficients[k] / mu[k];
    return acc;
}

}  // namespace mklrate
