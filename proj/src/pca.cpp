#include "mmu/pca.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mmu/csv.hpp"
#include "mmu/errors.hpp"

namespace mmu {

std::string_view kind_name(SignalKind k) {
    return k == SignalKind::Amplitude ? "amplitude" : "phase";
}

void DataMatrix::validate() const {
    if (rows() < 2) fail("data matrix: need at least 2 rows");
    if (cols() < 2) fail("data matrix: need at least 2 columns");
    if (unit_ids.size() != cols()) fail("data matrix: unit id count mismatch");
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < cols(); ++j)
            if (!std::isfinite(values(i, j)))
                fail("data matrix: non-finite entry at row " + std::to_string(i) +
                     ", unit " + unit_ids[j]);
}

DataMatrix DataMatrix::select_units(const std::vector<std::size_t>& idx) const {
    DataMatrix out;
    out.values = select_columns(values, idx);
    out.kind = kind;
    for (std::size_t j : idx) out.unit_ids.push_back(unit_ids[j]);
    return out;
}

Mat PcaModel::principal() const {
    const std::size_t n = dim();
    Mat p(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) p(i, j) = v(i, j);
    return p;
}

Mat PcaModel::residual() const {
    const std::size_t n = dim();
    Mat r(n, n - m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = m; j < n; ++j) r(i, j - m) = v(i, j);
    return r;
}

PcaModel fit(const DataMatrix& s, double kappa, const FitOptions& opts) {
    s.validate();
    if (!(kappa > 0.0 && kappa < 1.0)) fail("pca fit: kappa must be in (0, 1)");
    const std::size_t rows = s.rows(), n = s.cols();

    PcaModel model;
    model.kappa = kappa;
    model.rule = opts.rule;
    model.kind = s.kind;
    model.unit_ids = s.unit_ids;
    model.mu.resize(n);
    model.sigma.resize(n);

    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < rows; ++i) sum += s.values(i, j);
        model.mu[j] = sum / static_cast<double>(rows);
        double ss = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double d = s.values(i, j) - model.mu[j];
            ss += d * d;
        }
        model.sigma[j] = std::sqrt(ss / static_cast<double>(rows - 1));
        if (!(model.sigma[j] > 1e-13 * (std::abs(model.mu[j]) + 1.0)))
            fail("pca fit: degenerate (constant) column for unit " + s.unit_ids[j]);
    }

    // Correlation matrix of the training data.
    Mat z(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < rows; ++i)
                acc += (s.values(i, a) - model.mu[a]) * (s.values(i, b) - model.mu[b]);
            const double val =
                acc / (static_cast<double>(rows - 1) * model.sigma[a] * model.sigma[b]);
            z(a, b) = z(b, a) = val;
        }
    }

    SymEig eig = eig_symmetric(z);
    model.eigenvalues = std::move(eig.values);
    for (double& l : model.eigenvalues) l = std::max(l, 0.0);  // floor tiny negatives
    model.v = std::move(eig.vectors);

    double total = 0.0;
    for (double l : model.eigenvalues)
        total += opts.rule == VarianceRule::SquaredEigenvalues ? l * l : l;
    if (!(total > 0.0)) fail("pca fit: zero spectrum");
    std::size_t m = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = model.eigenvalues[i];
        acc += opts.rule == VarianceRule::SquaredEigenvalues ? l * l : l;
        if (acc / total > kappa) {
            m = i + 1;
            break;
        }
    }
    if (opts.max_components > 0) m = std::min(m, opts.max_components);
    if (m >= n)
        fail("pca fit: no residual subspace left (m = n = " + std::to_string(n) +
             "); lower kappa or cap the component count");
    model.m = m;
    return model;
}

Mat normalize_test(const DataMatrix& x, const PcaModel& model) {
    x.validate();
    if (x.kind != model.kind) fail("pca: test data kind does not match model");
    if (x.unit_ids != model.unit_ids)
        fail("pca: test data columns do not match model units");
    Mat out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = (x.values(i, j) - model.mu[j]) / model.sigma[j];
    return out;
}

Decomposition decompose(const Mat& xbar, const PcaModel& model) {
    const std::size_t n = model.dim();
    if (xbar.cols() != n) fail("pca decompose: column count does not match model");
    const Mat p = model.principal();
    const Mat r = model.residual();
    Decomposition d;
    d.main = mul(mul(xbar, p), transposed(p));
    d.residual = mul(mul(xbar, r), transposed(r));
    return d;
}

namespace {
void put_vector(std::ostream& out, const std::string& tag,
                const std::vector<double>& v) {
    out << tag;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
}
}  // namespace

void save_model(const PcaModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open for writing: " + path);
    out << "mmu-pca v1\n";
    out << "kind " << kind_name(model.kind) << '\n';
    out << "units";
    for (const auto& u : model.unit_ids) out << ' ' << u;
    out << '\n';
    out << "kappa " << format_double(model.kappa) << '\n';
    out << "rule " << (model.rule == VarianceRule::SquaredEigenvalues ? "squared" : "cumulative")
        << '\n';
    out << "m " << model.m << '\n';
    put_vector(out, "mu", model.mu);
    put_vector(out, "sigma", model.sigma);
    put_vector(out, "eigenvalues", model.eigenvalues);
    out << "v\n";
    for (std::size_t i = 0; i < model.v.rows(); ++i) {
        for (std::size_t j = 0; j < model.v.cols(); ++j) {
            if (j) out << ' ';
            out << format_double(model.v(i, j));
        }
        out << '\n';
    }
    out.close();
    if (!out) fail("write failed: " + path);
}

namespace {
std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream iss(line);
    std::string t;
    while (iss >> t) toks.push_back(t);
    return toks;
}

std::vector<double> expect_vector(const std::vector<std::string>& toks,
                                  const std::string& tag, std::size_t n,
                                  const std::string& path) {
    if (toks.empty() || toks[0] != tag || toks.size() != n + 1)
        fail(path + ": malformed '" + tag + "' line");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = parse_double(toks[i + 1], path + ": " + tag, true);
    return v;
}
}  // namespace

PcaModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open: " + path);
    std::string line;
    auto next_tokens = [&]() {
        if (!std::getline(in, line)) fail(path + ": truncated model file");
        return tokens_of(line);
    };

    auto magic = next_tokens();
    if (magic.size() != 2 || magic[0] != "mmu-pca" || magic[1] != "v1")
        fail(path + ": not a pca model file");

    PcaModel model;
    auto kind = next_tokens();
    if (kind.size() != 2 || kind[0] != "kind") fail(path + ": malformed kind line");
    if (kind[1] == "amplitude") model.kind = SignalKind::Amplitude;
    else if (kind[1] == "phase") model.kind = SignalKind::Phase;
    else fail(path + ": unknown kind " + kind[1]);

    auto units = next_tokens();
    if (units.empty() || units[0] != "units" || units.size() < 3)
        fail(path + ": malformed units line");
    model.unit_ids.assign(units.begin() + 1, units.end());
    const std::size_t n = model.unit_ids.size();

    auto kappa = next_tokens();
    if (kappa.size() != 2 || kappa[0] != "kappa") fail(path + ": malformed kappa line");
    model.kappa = parse_double(kappa[1], path + ": kappa");

    auto rule = next_tokens();
    if (rule.size() != 2 || rule[0] != "rule") fail(path + ": malformed rule line");
    if (rule[1] == "squared") model.rule = VarianceRule::SquaredEigenvalues;
    else if (rule[1] == "cumulative") model.rule = VarianceRule::Cumulative;
    else fail(path + ": unknown rule " + rule[1]);

    auto m_line = next_tokens();
    if (m_line.size() != 2 || m_line[0] != "m") fail(path + ": malformed m line");
    const long m = parse_long(m_line[1], path + ": m");
    if (m < 1 || m >= static_cast<long>(n)) fail(path + ": m out of range");
    model.m = static_cast<std::size_t>(m);

    model.mu = expect_vector(next_tokens(), "mu", n, path);
    model.sigma = expect_vector(next_tokens(), "sigma", n, path);
    model.eigenvalues = expect_vector(next_tokens(), "eigenvalues", n, path);

    auto v_tag = next_tokens();
    if (v_tag.size() != 1 || v_tag[0] != "v") fail(path + ": malformed v line");
    model.v = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = next_tokens();
        if (row.size() != n) fail(path + ": malformed eigenvector row");
        for (std::size_t j = 0; j < n; ++j)
            model.v(i, j) = parse_double(row[j], path + ": v");
    }
    return model;
}

}  // namespace mmu
