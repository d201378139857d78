#include "ict/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include "ict/errors.hpp"

namespace ict {

namespace {

constexpr double kCosineClamp = 1e-7;  // keeps acos away from the +-1 poles

std::size_t checked_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("tensor extent must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

}  // namespace

std::string Tensor::shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    std::size_t n = checked_size(shape);
    impl->shape = std::move(shape);
    impl->values.assign(n, value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (checked_size(shape) != values.size())
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

double Tensor::value() const {
    if (size() != 1) throw ContractError("value() requires a scalar tensor, got " +
                                         shape_str(shape()));
    return impl_->values[0];
}

double Tensor::at(int r, int c) const {
    return impl_->values[static_cast<std::size_t>(r) * impl_->shape[1] + c];
}

double& Tensor::at(int r, int c) {
    return impl_->values[static_cast<std::size_t>(r) * impl_->shape[1] + c];
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient; run backward() first");
    return *impl_->grad;
}

void matmul_raw(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        std::fill(crow, crow + n, 0.0);
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

namespace {

// C += A * B variants used by backward rules.
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A^T * B where A is [k x m] stored row-major (so A^T is [m x k]).
void matmul_at_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<std::size_t>(p) * m;
        const double* brow = b + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T where B is [n x k] stored row-major.
void matmul_bt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

std::vector<double>& slot(GradStore& store, const TensorImpl* t) {
    auto it = store.find(t);
    if (it == store.end())
        it = store.emplace(t, std::vector<double>(t->values.size(), 0.0)).first;
    return it->second;
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " +
                                            Tensor::shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             Tensor::shape_str(a.shape()) + " vs " +
                             Tensor::shape_str(b.shape()));
}

}  // namespace

Tensor Tape::make_output(std::vector<int> shape, std::vector<double> values,
                         const std::vector<Tensor>& inputs,
                         std::function<void(const std::vector<double>&, GradStore&)> pull) {
    Tensor out = Tensor::from(std::move(shape), std::move(values));
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
        out.set_requires_grad(true);
        Record rec;
        rec.output = out.handle();
        rec.inputs.reserve(inputs.size());
        for (const auto& in : inputs) rec.inputs.push_back(in.handle());
        rec.pull = std::move(pull);
        records_.push_back(std::move(rec));
    }
    return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const int m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2)
        throw DimensionError("matmul: inner extents differ, " + Tensor::shape_str(a.shape()) +
                             " x " + Tensor::shape_str(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    matmul_raw(a.values().data(), b.values().data(), out.data(), m, k, n);

    auto ai = a.handle(), bi = b.handle();
    return make_output({m, n}, std::move(out), {a, b},
                       [ai, bi, m, k, n](const std::vector<double>& g, GradStore& store) {
                           if (ai->requires_grad)
                               matmul_bt_acc(g.data(), bi->values.data(),
                                             slot(store, ai.get()).data(), m, n, k);
                           if (bi->requires_grad)
                               matmul_at_acc(ai->values.data(), g.data(),
                                             slot(store, bi.get()).data(), k, m, n);
                       });
}

Tensor Tape::transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const int r = a.extent(0), c = a.extent(1);
    std::vector<double> out(a.values().size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(j) * r + i] = a.at(i, j);
    auto ai = a.handle();
    return make_output({c, r}, std::move(out), {a},
                       [ai, r, c](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (int i = 0; i < r; ++i)
                               for (int j = 0; j < c; ++j)
                                   ga[static_cast<std::size_t>(i) * c + j] +=
                                       g[static_cast<std::size_t>(j) * r + i];
                       });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    auto ai = a.handle(), bi = b.handle();
    return make_output(a.shape(), std::move(out), {a, b},
                       [ai, bi](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                           auto& gb = slot(store, bi.get());
                           for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                       });
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    auto ai = a.handle(), bi = b.handle();
    return make_output(a.shape(), std::move(out), {a, b},
                       [ai, bi](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                           auto& gb = slot(store, bi.get());
                           for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    auto ai = a.handle(), bi = b.handle();
    return make_output(a.shape(), std::move(out), {a, b},
                       [ai, bi](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i)
                               ga[i] += g[i] * bi->values[i];
                           auto& gb = slot(store, bi.get());
                           for (std::size_t i = 0; i < g.size(); ++i)
                               gb[i] += g[i] * ai->values[i];
                       });
}

Tensor Tape::scale(const Tensor& a, double c) {
    std::vector<double> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    auto ai = a.handle();
    return make_output(a.shape(), std::move(out), {a},
                       [ai, c](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
                       });
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& v) {
    require_rank2(a, "add_rowvec");
    if (v.rank() != 1 || v.extent(0) != a.extent(1))
        throw DimensionError("add_rowvec: vector " + Tensor::shape_str(v.shape()) +
                             " does not match columns of " + Tensor::shape_str(a.shape()));
    const int r = a.extent(0), c = a.extent(1);
    std::vector<double> out(a.values().size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(i) * c + j] = a.at(i, j) + v.at(j);
    auto ai = a.handle(), vi = v.handle();
    return make_output(a.shape(), std::move(out), {a, v},
                       [ai, vi, r, c](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                           auto& gv = slot(store, vi.get());
                           for (int i = 0; i < r; ++i)
                               for (int j = 0; j < c; ++j)
                                   gv[j] += g[static_cast<std::size_t>(i) * c + j];
                       });
}

Tensor Tape::sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    auto ai = a.handle();
    return make_output({1}, {s}, {a},
                       [ai](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (double& x : ga) x += g[0];
                       });
}

Tensor Tape::softmax(const Tensor& a, int axis) {
    if (axis < 0 || axis >= a.rank())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                             Tensor::shape_str(a.shape()));
    const int n = a.extent(axis);
    std::size_t inner = 1, outer = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(a.extent(i));
    for (int i = axis + 1; i < a.rank(); ++i) inner *= static_cast<std::size_t>(a.extent(i));

    std::vector<double> out(a.values().size());
    const auto& x = a.values();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            double mx = x[base];
            for (int k = 1; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
            double denom = 0.0;
            for (int k = 0; k < n; ++k) {
                const double e = std::exp(x[base + k * inner] - mx);
                out[base + k * inner] = e;
                denom += e;
            }
            for (int k = 0; k < n; ++k) out[base + k * inner] /= denom;
        }
    }

    auto ai = a.handle();
    auto yi = std::make_shared<std::vector<double>>(out);  // keep own copy of outputs
    return make_output(a.shape(), std::move(out), {a},
                       [ai, yi, n, inner, outer](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           const auto& y = *yi;
                           for (std::size_t o = 0; o < outer; ++o) {
                               for (std::size_t in = 0; in < inner; ++in) {
                                   const std::size_t base = o * n * inner + in;
                                   double dot = 0.0;
                                   for (int k = 0; k < n; ++k)
                                       dot += g[base + k * inner] * y[base + k * inner];
                                   for (int k = 0; k < n; ++k)
                                       ga[base + k * inner] +=
                                           y[base + k * inner] * (g[base + k * inner] - dot);
                               }
                           }
                       });
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.rank() < 1) throw DimensionError("layer_norm: rank-0 input");
    const int d = x.extent(x.rank() - 1);
    if (gain.rank() != 1 || gain.extent(0) != d || bias.rank() != 1 || bias.extent(0) != d)
        throw DimensionError("layer_norm: gain/bias must be [d] with d = " + std::to_string(d));
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    const std::size_t rows = x.values().size() / static_cast<std::size_t>(d);

    std::vector<double> out(x.values().size());
    auto xhat = std::make_shared<std::vector<double>>(x.values().size());
    auto inv_sd = std::make_shared<std::vector<double>>(rows);
    const auto& xs = x.values();
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xs[base + j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = xs[base + j] - mean;
            var += c * c;
        }
        var /= d;
        const double isd = 1.0 / std::sqrt(var + eps);
        (*inv_sd)[r] = isd;
        for (int j = 0; j < d; ++j) {
            const double h = (xs[base + j] - mean) * isd;
            (*xhat)[base + j] = h;
            out[base + j] = gain.at(j) * h + bias.at(j);
        }
    }

    auto xi = x.handle(), gi = gain.handle(), bi = bias.handle();
    return make_output(
        x.shape(), std::move(out), {x, gain, bias},
        [xi, gi, bi, xhat, inv_sd, d, rows](const std::vector<double>& g, GradStore& store) {
            auto& gx = slot(store, xi.get());
            auto& gg = slot(store, gi.get());
            auto& gb = slot(store, bi.get());
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t base = r * d;
                const double isd = (*inv_sd)[r];
                double sum_gh = 0.0, sum_gh_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double gh = g[base + j] * gi->values[static_cast<std::size_t>(j)];
                    sum_gh += gh;
                    sum_gh_xhat += gh * (*xhat)[base + j];
                }
                for (int j = 0; j < d; ++j) {
                    const double gh = g[base + j] * gi->values[static_cast<std::size_t>(j)];
                    gx[base + j] += isd * (gh - sum_gh / d - (*xhat)[base + j] * sum_gh_xhat / d);
                    gg[static_cast<std::size_t>(j)] += g[base + j] * (*xhat)[base + j];
                    gb[static_cast<std::size_t>(j)] += g[base + j];
                }
            }
        });
}

Tensor Tape::gelu(const Tensor& a) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c3 = 0.044715;
    std::vector<double> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(k * (x + c3 * x * x * x)));
    }
    auto ai = a.handle();
    return make_output(a.shape(), std::move(out), {a},
                       [ai](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               const double x = ai->values[i];
                               const double u = k * (x + c3 * x * x * x);
                               const double t = std::tanh(u);
                               const double du = k * (1.0 + 3.0 * c3 * x * x);
                               ga[i] += g[i] * (0.5 * (1.0 + t) +
                                                0.5 * x * (1.0 - t * t) * du);
                           }
                       });
}

Tensor Tape::l2_normalize(const Tensor& v) {
    if (v.rank() != 1) throw DimensionError("l2_normalize expects a rank-1 tensor, got " +
                                            Tensor::shape_str(v.shape()));
    double nsq = 0.0;
    for (double x : v.values()) nsq += x * x;
    const double norm = std::sqrt(nsq);
    if (norm < 1e-12) throw DegenerateInputError("l2_normalize: zero-norm vector");
    std::vector<double> out(v.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.values()[i] / norm;

    auto vi = v.handle();
    auto yi = std::make_shared<std::vector<double>>(out);
    return make_output(v.shape(), std::move(out), {v},
                       [vi, yi, norm](const std::vector<double>& g, GradStore& store) {
                           auto& gv = slot(store, vi.get());
                           const auto& y = *yi;
                           double dot = 0.0;
                           for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
                           for (std::size_t i = 0; i < g.size(); ++i)
                               gv[i] += (g[i] - y[i] * dot) / norm;
                       });
}

Tensor Tape::l2_normalize_cols(const Tensor& m) {
    require_rank2(m, "l2_normalize_cols");
    const int r = m.extent(0), c = m.extent(1);
    std::vector<double> norms(static_cast<std::size_t>(c), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) norms[static_cast<std::size_t>(j)] += m.at(i, j) * m.at(i, j);
    for (int j = 0; j < c; ++j) {
        norms[static_cast<std::size_t>(j)] = std::sqrt(norms[static_cast<std::size_t>(j)]);
        if (norms[static_cast<std::size_t>(j)] < 1e-12)
            throw DegenerateInputError("l2_normalize_cols: zero-norm column " + std::to_string(j));
    }
    std::vector<double> out(m.values().size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<std::size_t>(i) * c + j] = m.at(i, j) / norms[static_cast<std::size_t>(j)];

    auto mi = m.handle();
    auto yi = std::make_shared<std::vector<double>>(out);
    auto ni = std::make_shared<std::vector<double>>(std::move(norms));
    return make_output(m.shape(), std::move(out), {m},
                       [mi, yi, ni, r, c](const std::vector<double>& g, GradStore& store) {
                           auto& gm = slot(store, mi.get());
                           const auto& y = *yi;
                           for (int j = 0; j < c; ++j) {
                               double dot = 0.0;
                               for (int i = 0; i < r; ++i)
                                   dot += g[static_cast<std::size_t>(i) * c + j] *
                                          y[static_cast<std::size_t>(i) * c + j];
                               const double inv = 1.0 / (*ni)[static_cast<std::size_t>(j)];
                               for (int i = 0; i < r; ++i) {
                                   const std::size_t k = static_cast<std::size_t>(i) * c + j;
                                   gm[k] += (g[k] - y[k] * dot) * inv;
                               }
                           }
                       });
}

Tensor Tape::angular_margin_logits(const Tensor& cosines, int target, double s, double m) {
    if (cosines.rank() != 1)
        throw DimensionError("angular_margin_logits expects a rank-1 cosine row, got " +
                             Tensor::shape_str(cosines.shape()));
    const int n = cosines.extent(0);
    if (target < 0 || target >= n)
        throw ContractError("angular_margin_logits: target " + std::to_string(target) +
                            " out of range [0," + std::to_string(n) + ")");
    std::vector<double> out(static_cast<std::size_t>(n));
    auto theta = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    auto clamped = std::make_shared<std::vector<char>>(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double cj = cosines.at(j);
        const bool cl = cj <= -1.0 + kCosineClamp || cj >= 1.0 - kCosineClamp;
        cj = std::clamp(cj, -1.0 + kCosineClamp, 1.0 - kCosineClamp);
        const double th = std::acos(cj);
        (*theta)[static_cast<std::size_t>(j)] = th;
        (*clamped)[static_cast<std::size_t>(j)] = cl ? 1 : 0;
        out[static_cast<std::size_t>(j)] = s * std::cos(th + (j == target ? m : 0.0));
    }
    auto ci = cosines.handle();
    return make_output(
        cosines.shape(), std::move(out), {cosines},
        [ci, theta, clamped, target, s, m, n](const std::vector<double>& g, GradStore& store) {
            auto& gc = slot(store, ci.get());
            for (int j = 0; j < n; ++j) {
                const std::size_t k = static_cast<std::size_t>(j);
                if ((*clamped)[k]) continue;  // flat outside the clamp window
                const double th = (*theta)[k];
                const double mm = (j == target) ? m : 0.0;
                // d/dc [s cos(acos(c)+mm)] = s sin(acos(c)+mm) / sin(acos(c))
                gc[k] += g[k] * s * std::sin(th + mm) / std::sin(th);
            }
        });
}

Tensor Tape::cross_entropy_logits(const Tensor& logits, int target) {
    if (logits.rank() != 1)
        throw DimensionError("cross_entropy_logits expects rank-1 logits, got " +
                             Tensor::shape_str(logits.shape()));
    const int n = logits.extent(0);
    if (target < 0 || target >= n)
        throw ContractError("cross_entropy_logits: target " + std::to_string(target) +
                            " out of range [0," + std::to_string(n) + ")");
    const auto& z = logits.values();
    double mx = z[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, z[static_cast<std::size_t>(j)]);
    double denom = 0.0;
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double e = std::exp(z[static_cast<std::size_t>(j)] - mx);
        (*probs)[static_cast<std::size_t>(j)] = e;
        denom += e;
    }
    for (auto& p : *probs) p /= denom;
    const double loss = std::log(denom) + mx - z[static_cast<std::size_t>(target)];

    auto zi = logits.handle();
    return make_output({1}, {loss}, {logits},
                       [zi, probs, target](const std::vector<double>& g, GradStore& store) {
                           auto& gz = slot(store, zi.get());
                           for (std::size_t j = 0; j < gz.size(); ++j)
                               gz[j] += g[0] * ((*probs)[j] -
                                                (static_cast<int>(j) == target ? 1.0 : 0.0));
                       });
}

Tensor Tape::reshape(const Tensor& a, std::vector<int> shape) {
    if (checked_size(shape) != a.values().size())
        throw DimensionError("reshape: size mismatch, " + Tensor::shape_str(a.shape()) +
                             " -> " + Tensor::shape_str(shape));
    auto ai = a.handle();
    return make_output(std::move(shape), a.values(), {a},
                       [ai](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       });
}

Tensor Tape::slice_rows(const Tensor& a, int row0, int nrows) {
    require_rank2(a, "slice_rows");
    const int r = a.extent(0), c = a.extent(1);
    if (row0 < 0 || nrows <= 0 || row0 + nrows > r)
        throw DimensionError("slice_rows: range [" + std::to_string(row0) + "," +
                             std::to_string(row0 + nrows) + ") out of " + std::to_string(r));
    std::vector<double> out(static_cast<std::size_t>(nrows) * c);
    std::copy_n(a.values().begin() + static_cast<std::size_t>(row0) * c, out.size(), out.begin());
    auto ai = a.handle();
    return make_output({nrows, c}, std::move(out), {a},
                       [ai, row0, c](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           const std::size_t off = static_cast<std::size_t>(row0) * c;
                           for (std::size_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
                       });
}

Tensor Tape::slice_cols(const Tensor& a, int col0, int ncols) {
    require_rank2(a, "slice_cols");
    const int r = a.extent(0), c = a.extent(1);
    if (col0 < 0 || ncols <= 0 || col0 + ncols > c)
        throw DimensionError("slice_cols: range [" + std::to_string(col0) + "," +
                             std::to_string(col0 + ncols) + ") out of " + std::to_string(c));
    std::vector<double> out(static_cast<std::size_t>(r) * ncols);
    for (int i = 0; i < r; ++i)
        std::copy_n(a.values().begin() + static_cast<std::size_t>(i) * c + col0, ncols,
                    out.begin() + static_cast<std::size_t>(i) * ncols);
    auto ai = a.handle();
    return make_output({r, ncols}, std::move(out), {a},
                       [ai, col0, ncols, r, c](const std::vector<double>& g, GradStore& store) {
                           auto& ga = slot(store, ai.get());
                           for (int i = 0; i < r; ++i)
                               for (int j = 0; j < ncols; ++j)
                                   ga[static_cast<std::size_t>(i) * c + col0 + j] +=
                                       g[static_cast<std::size_t>(i) * ncols + j];
                       });
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const int c = parts[0].extent(1);
    int rtotal = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.extent(1) != c)
            throw DimensionError("concat_rows: column mismatch " + Tensor::shape_str(p.shape()));
        rtotal += p.extent(0);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rtotal) * c);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());

    std::vector<std::shared_ptr<TensorImpl>> handles;
    for (const auto& p : parts) handles.push_back(p.handle());
    return make_output({rtotal, c}, std::move(out), parts,
                       [handles](const std::vector<double>& g, GradStore& store) {
                           std::size_t off = 0;
                           for (const auto& h : handles) {
                               auto& gp = slot(store, h.get());
                               for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
                               off += gp.size();
                           }
                       });
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const int r = parts[0].extent(0);
    int ctotal = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.extent(0) != r)
            throw DimensionError("concat_cols: row mismatch " + Tensor::shape_str(p.shape()));
        ctotal += p.extent(1);
    }
    std::vector<double> out(static_cast<std::size_t>(r) * ctotal);
    int coff = 0;
    for (const auto& p : parts) {
        const int pc = p.extent(1);
        for (int i = 0; i < r; ++i)
            std::copy_n(p.values().begin() + static_cast<std::size_t>(i) * pc, pc,
                        out.begin() + static_cast<std::size_t>(i) * ctotal + coff);
        coff += pc;
    }
    std::vector<std::shared_ptr<TensorImpl>> handles;
    std::vector<int> widths;
    for (const auto& p : parts) {
        handles.push_back(p.handle());
        widths.push_back(p.extent(1));
    }
    return make_output({r, ctotal}, std::move(out), parts,
                       [handles, widths, r, ctotal](const std::vector<double>& g, GradStore& store) {
                           int coff = 0;
                           for (std::size_t k = 0; k < handles.size(); ++k) {
                               auto& gp = slot(store, handles[k].get());
                               const int pc = widths[k];
                               for (int i = 0; i < r; ++i)
                                   for (int j = 0; j < pc; ++j)
                                       gp[static_cast<std::size_t>(i) * pc + j] +=
                                           g[static_cast<std::size_t>(i) * ctotal + coff + j];
                               coff += pc;
                           }
                       });
}

void Tape::run_backward(const Tensor& loss, GradStore& store) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a scalar tensor");
    store[loss.impl()] = {1.0};
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        auto found = store.find(it->output.get());
        if (found == store.end()) continue;  // not on the path to the loss
        it->pull(found->second, store);
    }
}

void Tape::backward(const Tensor& loss, GradStore& grads) { run_backward(loss, grads); }

void Tape::backward(const Tensor& loss) {
    GradStore store;
    run_backward(loss, store);
    auto publish = [&store](const std::shared_ptr<TensorImpl>& t) {
        if (!t->requires_grad) return;
        auto it = store.find(t.get());
        if (it == store.end()) return;
        t->grad = std::make_unique<std::vector<double>>(it->second);
    };
    publish(loss.handle());
    for (const auto& rec : records_) {
        publish(rec.output);
        for (const auto& in : rec.inputs) publish(in);
    }
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
    if (h <= 0.0) throw ContractError("finite_diff_grad: h must be positive");
    Tensor probe = Tensor::from(x.shape(), x.values());
    Tensor g = Tensor::zeros(x.shape());
    for (int i = 0; i < x.size(); ++i) {
        const double orig = probe.values()[static_cast<std::size_t>(i)];
        probe.values()[static_cast<std::size_t>(i)] = orig + h;
        const double fp = f(probe);
        probe.values()[static_cast<std::size_t>(i)] = orig - h;
        const double fm = f(probe);
        probe.values()[static_cast<std::size_t>(i)] = orig;
        g.values()[static_cast<std::size_t>(i)] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace ict
