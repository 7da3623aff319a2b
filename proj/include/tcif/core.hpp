#pragma once

// Dense 64-bit tensors with tape-based reverse-mode autodiff.
// One tape per forward pass, rebuilt every time; backward replays the
// tape in exact reverse insertion order and accumulates gradients
// additively, so fan-out just works.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcif {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape disagreements between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or violated precondition.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Explicit-scheme stability bound violated.
class StabilityError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// Deterministic RNG. mt19937_64 has a fully specified sequence; the
// float conversions below avoid std::uniform_real_distribution, whose
// output is implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until needed
    bool requires_grad = false;
};

}  // namespace detail

class Tensor {
public:
    Tensor() : im_(std::make_shared<detail::TensorImpl>()) {}

    explicit Tensor(Shape shape, bool requires_grad = false)
        : im_(std::make_shared<detail::TensorImpl>()) {
        im_->shape = std::move(shape);
        im_->data.assign(static_cast<size_t>(numel_of(im_->shape)), 0.0);
        im_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.im_->data.begin(), t.im_->data.end(), v);
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    static Tensor from(std::vector<double> values, Shape shape) {
        if (static_cast<int64_t>(values.size()) != numel_of(shape))
            throw DimensionError("value count " + std::to_string(values.size()) +
                                 " does not fill shape " + shape_str(shape));
        Tensor t;
        t.im_->shape = std::move(shape);
        t.im_->data = std::move(values);
        return t;
    }

    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                          bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        for (double& v : t.im_->data) v = rng.uniform(lo, hi);
        return t;
    }

    const Shape& shape() const { return im_->shape; }
    int ndim() const { return static_cast<int>(im_->shape.size()); }
    int64_t dim(int i) const { return im_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(im_->data.size()); }

    double* data() { return im_->data.data(); }
    const double* data() const { return im_->data.data(); }

    bool requires_grad() const { return im_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        im_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !im_->grad.empty(); }

    void ensure_grad() {
        if (im_->grad.empty()) im_->grad.assign(im_->data.size(), 0.0);
    }

    double* grad() {
        ensure_grad();
        return im_->grad.data();
    }
    const double* grad() const {
        if (im_->grad.empty()) throw Error("gradient not allocated");
        return im_->grad.data();
    }

    void zero_grad() {
        if (!im_->grad.empty()) std::fill(im_->grad.begin(), im_->grad.end(), 0.0);
    }

    double item() const {
        if (numel() != 1)
            throw DimensionError("item() on tensor of shape " + shape_str(im_->shape));
        return im_->data[0];
    }

    // row-major multi-index access, test convenience
    double at(std::initializer_list<int64_t> idx) const {
        return im_->data[static_cast<size_t>(flat_index(idx))];
    }
    double& at(std::initializer_list<int64_t> idx) {
        return im_->data[static_cast<size_t>(flat_index(idx))];
    }

    bool same_shape(const Tensor& o) const { return im_->shape == o.im_->shape; }

    // deep copy; Tensor itself is a shared handle
    Tensor clone() const {
        Tensor t;
        *t.im_ = *im_;
        return t;
    }

    std::shared_ptr<detail::TensorImpl> impl() const { return im_; }

private:
    int64_t flat_index(std::initializer_list<int64_t> idx) const {
        if (static_cast<int>(idx.size()) != ndim())
            throw DimensionError("index rank mismatch for shape " + shape_str(im_->shape));
        int64_t flat = 0;
        auto it = idx.begin();
        for (int d = 0; d < ndim(); ++d, ++it) flat = flat * im_->shape[static_cast<size_t>(d)] + *it;
        return flat;
    }

    std::shared_ptr<detail::TensorImpl> im_;
};

// Reverse-mode tape. While a Graph is alive it is the active tape for
// the thread; ops whose inputs require gradients record a backward
// closure onto it. Graphs nest (the innermost wins) but a forward pass
// normally builds exactly one.
class Graph {
public:
    Graph() : prev_(current_) { current_ = this; }
    ~Graph() { current_ = prev_; }

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    static Graph* current() { return current_; }

    void record(std::function<void()> backward_fn) {
        tape_.push_back(std::move(backward_fn));
    }

    size_t size() const { return tape_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape backwards.
    void backward(Tensor loss) {
        if (loss.numel() != 1)
            throw DimensionError("backward() needs a scalar loss, got shape " +
                                 shape_str(loss.shape()));
        if (!loss.requires_grad())
            throw Error("backward() on a tensor with no recorded dependencies");
        loss.zero_grad();
        loss.grad()[0] = 1.0;
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> tape_;
    Graph* prev_ = nullptr;
    inline static thread_local Graph* current_ = nullptr;
};

namespace detail {

inline bool tracing(std::initializer_list<const Tensor*> inputs) {
    if (Graph::current() == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Marks `out` as a traced intermediate and pre-allocates the gradient
// buffers the recorded closure will touch.
inline void prepare_traced(Tensor& out, std::initializer_list<Tensor*> grad_inputs) {
    out.set_requires_grad(true);
    out.ensure_grad();
    for (Tensor* t : grad_inputs)
        if (t->requires_grad()) t->ensure_grad();
}

}  // namespace detail

}  // namespace tcif
