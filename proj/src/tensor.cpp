#include "mcted/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "mcted/util.hpp"

namespace mcted {

namespace {
size_t shape_product(const std::vector<int>& shape) {
    size_t n = 1;
    for (const int d : shape) {
        if (d < 0) throw dimension_error("tensor shape has negative extent");
        n *= static_cast<size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(int rows, int cols) : Tensor(std::vector<int>{rows, cols}) {}

Tensor Tensor::full(int rows, int cols, double value) {
    Tensor t(rows, cols);
    t.fill(value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t(1, 1);
    t[0] = value;
    return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
    Tensor t(1, static_cast<int>(values.size()));
    for (size_t i = 0; i < values.size(); ++i) t[i] = values[i];
    return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
    Tensor t(static_cast<int>(values.size()), 1);
    for (size_t i = 0; i < values.size(); ++i) t[i] = values[i];
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) throw dimension_error("rows() on tensor of rank " + std::to_string(rank()));
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw dimension_error("cols() on tensor of rank " + std::to_string(rank()));
    return shape_[1];
}

double& Tensor::at(int r, int c) {
    return data_[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

double Tensor::at(int r, int c) const {
    return data_[static_cast<size_t>(r) * static_cast<size_t>(cols()) + static_cast<size_t>(c)];
}

void Tensor::fill(double value) {
    for (double& x : data_) x = value;
}

bool Tensor::all_finite() const {
    for (const double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream ss;
    ss << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i > 0) ss << ",";
        ss << shape_[i];
    }
    ss << "]";
    return ss.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul: " + a.shape_str() + " x " + b.shape_str());
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c(m, n);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            double* crow = pc + i * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw dimension_error("matmul_nt: " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor c(m, n);
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c.at(i, j) = acc;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw dimension_error("matmul_tn: " + a.shape_str() + "^T x " + b.shape_str());
    }
    const int m = a.cols(), k = a.rows(), n = b.cols();
    Tensor c(m, n);
    for (int p = 0; p < k; ++p) {
        const double* arow = a.data() + p * m;
        const double* brow = b.data() + p * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.data() + i * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

void add_scaled(Tensor& dst, const Tensor& src, double s) {
    if (!dst.same_shape(src)) {
        throw dimension_error("add_scaled: " + dst.shape_str() + " += " + src.shape_str());
    }
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw dimension_error("max_abs_diff: " + a.shape_str() + " vs " + b.shape_str());
    }
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace mcted
