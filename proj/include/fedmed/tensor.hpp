#ifndef FEDMED_TENSOR_HPP
#define FEDMED_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedmed {

/// Dense NCHW tensor. Vectors (e.g. features, logits) use h = w = 1;
/// scalars use all dims = 1.
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor scalar(T v) {
        Tensor t(1, 1, 1, 1);
        t.data[0] = v;
        return t;
    }

    std::size_t size() const { return data.size(); }

    T& at(int in, int ic, int ih, int iw) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    T at(int in, int ic, int ih, int iw) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    T* sample_ptr(int in) { return data.data() + static_cast<std::size_t>(in) * c * h * w; }
    const T* sample_ptr(int in) const {
        return data.data() + static_cast<std::size_t>(in) * c * h * w;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

} // namespace fedmed

#endif // FEDMED_TENSOR_HPP
