#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace ict {

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> values;
    bool requires_grad = false;
    // Allocated by Tape::backward; same length as values.
    std::unique_ptr<std::vector<double>> grad;
};

// Shared handle to a dense row-major f64 array. Copies are shallow; two
// Tensor objects may alias the same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int extent(int axis) const { return impl_->shape[static_cast<std::size_t>(axis)]; }
    int size() const { return static_cast<int>(impl_->values.size()); }

    const std::vector<double>& values() const { return impl_->values; }
    std::vector<double>& values() { return impl_->values; }
    double value() const;  // scalar convenience; throws on non-scalar
    double at(int i) const { return impl_->values[static_cast<std::size_t>(i)]; }
    double at(int r, int c) const;
    double& at(int r, int c);

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool b) { impl_->requires_grad = b; }
    bool has_grad() const { return impl_ && impl_->grad != nullptr; }
    const std::vector<double>& grad() const;  // throws if no backward pass ran
    void clear_grad() { impl_->grad.reset(); }

    TensorImpl* impl() const { return impl_.get(); }
    std::shared_ptr<TensorImpl> handle() const { return impl_; }

    static std::string shape_str(const std::vector<int>& shape);

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
    friend class Tape;
};

// Gradient buffers keyed by tensor identity. Backward passes can write here
// instead of into TensorImpl::grad so that several tapes sharing parameter
// tensors can run on different threads without racing.
using GradStore = std::unordered_map<const TensorImpl*, std::vector<double>>;

// Records every differentiable op in execution order; replaying the records
// in reverse accumulates gradients additively. A Tape must stay on one thread.
class Tape {
public:
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& a);
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double c);
    // Adds row vector v to every row of rank-2 a (bias add).
    Tensor add_rowvec(const Tensor& a, const Tensor& v);
    Tensor sum(const Tensor& a);
    Tensor softmax(const Tensor& a, int axis);
    Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                      double eps = 1e-6);
    Tensor gelu(const Tensor& a);  // tanh approximation
    Tensor l2_normalize(const Tensor& v);
    Tensor l2_normalize_cols(const Tensor& m);
    // From a row of cosine similarities, s * cos(acos(clamped) + m on the
    // target entry). Margin-in-angle logits for the cosine softmax loss.
    Tensor angular_margin_logits(const Tensor& cosines, int target, double s, double m);
    Tensor cross_entropy_logits(const Tensor& logits, int target);
    Tensor reshape(const Tensor& a, std::vector<int> shape);
    Tensor slice_rows(const Tensor& a, int row0, int nrows);
    Tensor slice_cols(const Tensor& a, int col0, int ncols);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor concat_cols(const std::vector<Tensor>& parts);

    // Populates TensorImpl::grad on every requires_grad tensor reachable from
    // loss. Loss must be scalar.
    void backward(const Tensor& loss);
    // Same traversal, but gradients land only in `grads`; TensorImpl::grad is
    // left untouched (thread-safe against other tapes sharing leaves).
    void backward(const Tensor& loss, GradStore& grads);

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

private:
    struct Record {
        std::shared_ptr<TensorImpl> output;
        std::vector<std::shared_ptr<TensorImpl>> inputs;
        // Pull the output's gradient from the store and push contributions
        // into the inputs' store slots.
        std::function<void(const std::vector<double>&, GradStore&)> pull;
    };
    std::vector<Record> records_;

    Tensor make_output(std::vector<int> shape, std::vector<double> values,
                       const std::vector<Tensor>& inputs,
                       std::function<void(const std::vector<double>&, GradStore&)> pull);
    void run_backward(const Tensor& loss, GradStore& store);
};

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per element. Independent
// gradient oracle for backward(); f must be deterministic.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// C[m x n] = A[m x k] * B[k x n], raw row-major buffers. Exposed for reuse by
// non-autodiff code paths.
void matmul_raw(const double* a, const double* b, double* c, int m, int k, int n);

}  // namespace ict
