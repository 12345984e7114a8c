#include "hh/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "hh/dsp/envelope.hpp"
#include "hh/dsp/stft.hpp"
#include "hh/error.hpp"

namespace hh::eval {

namespace {

void require_comparable(const dsp::Waveform& a, const dsp::Waveform& b) {
    if (a.sample_rate != b.sample_rate)
        throw ValidationError("sample rates differ: " + std::to_string(a.sample_rate) + " vs " + std::to_string(b.sample_rate));
    if (a.samples.size() != b.samples.size())
        throw ValidationError("lengths differ: " + std::to_string(a.samples.size()) + " vs " + std::to_string(b.samples.size()) +
                              " samples");
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    // Eigenvalues under the floor are rounding noise around zero (rank-deficient covariances).
    const Eigen::VectorXd ev = es.eigenvalues().unaryExpr([](double v) { return v < 1e-10 ? 0.0 : std::sqrt(v); });
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double stft_distance(const dsp::Waveform& a, const dsp::Waveform& b, const dsp::DspConfig& cfg) {
    require_comparable(a, b);
    const auto sa = dsp::stft(a, cfg), sb = dsp::stft(b, cfg);
    double acc = 0;
    for (std::size_t i = 0; i < sa.data.size(); ++i) {
        const double d = std::log(std::max(sa.data[i], cfg.log_floor)) - std::log(std::max(sb.data[i], cfg.log_floor));
        acc += d * d;
    }
    return std::sqrt(acc / double(sa.data.size()));
}

double envelope_distance(const dsp::Waveform& a, const dsp::Waveform& b, double window_ms) {
    require_comparable(a, b);
    const auto ea = dsp::envelope(a, window_ms), eb = dsp::envelope(b, window_ms);
    double acc = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) acc += (double(ea[i]) - eb[i]) * (double(ea[i]) - eb[i]);
    return std::sqrt(acc / double(ea.size()));
}

double frechet_distance(const Matrix<double>& a, const Matrix<double>& b, int min_samples) {
    if (a.cols != b.cols) throw ValidationError("feature widths differ: " + std::to_string(a.cols) + " vs " + std::to_string(b.cols));
    if (a.rows < min_samples || b.rows < min_samples)
        throw ValidationError("Fréchet distance needs at least " + std::to_string(min_samples) + " samples per set (got " +
                              std::to_string(a.rows) + " and " + std::to_string(b.rows) + ")");
    auto fit = [](const Matrix<double>& m, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(m.data.data(), m.rows, m.cols);
        mu = x.colwise().mean().transpose();
        const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
        cov = m.rows > 1 ? Eigen::MatrixXd(c.transpose() * c / double(m.rows - 1)) : Eigen::MatrixXd::Zero(m.cols, m.cols);
    };
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd ca, cb;
    fit(a, mu_a, ca);
    fit(b, mu_b, cb);
    // (Sa Sb)^(1/2) has the same trace as (Sa^(1/2) Sb Sa^(1/2))^(1/2), which is symmetric.
    const Eigen::MatrixXd ra = sqrt_psd(ca);
    const Eigen::MatrixXd mid = ra * cb * ra;
    const double tr_sqrt = sqrt_psd(0.5 * (mid + mid.transpose())).trace();
    const double d = (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2 * tr_sqrt;
    return std::max(0.0, d);
}

double score_entropy(const Matrix<double>& probs) {
    if (probs.rows < 1) throw ValidationError("score entropy needs at least one clip");
    std::vector<double> marginal(probs.cols, 0.0);
    for (int r = 0; r < probs.rows; ++r)
        for (int c = 0; c < probs.cols; ++c) marginal[c] += probs(r, c) / probs.rows;
    double kl = 0;
    for (int r = 0; r < probs.rows; ++r)
        for (int c = 0; c < probs.cols; ++c)
            if (probs(r, c) > 0) kl += probs(r, c) * (std::log(probs(r, c)) - std::log(marginal[c]));
    return std::exp(kl / probs.rows);
}

double envelope_lag(const dsp::Waveform& a, const dsp::Waveform& b, double window_ms, double max_lag_s) {
    require_comparable(a, b);
    const auto ea = dsp::envelope(a, window_ms), eb = dsp::envelope(b, window_ms);
    auto centred = [](std::vector<float> e) {
        double mean = 0;
        for (float v : e) mean += v;
        mean /= double(e.size());
        std::vector<double> out(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) out[i] = e[i] - mean;
        return out;
    };
    const auto xa = centred(ea), xb = centred(eb);
    const long n = static_cast<long>(xa.size());
    const long max_lag = std::lround(max_lag_s * a.sample_rate);
    long best_lag = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (long lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0;
        for (long i = std::max(0L, -lag); i < std::min(n, n - lag); ++i) acc += xa[i] * xb[i + lag];
        if (acc > best || (acc == best && std::abs(lag) < std::abs(best_lag))) best = acc, best_lag = lag;
    }
    return double(best_lag) / a.sample_rate;
}

double value_wasserstein(std::vector<float> a, std::vector<float> b) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("value distributions must be non-empty and equal-sized");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(double(a[i]) - b[i]);
    return acc / double(a.size());
}

}  // namespace hh::eval
