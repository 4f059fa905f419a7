#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mcted {

// Dense row-major tensor of 64-bit floats. Everything the model touches is
// rank 1 or 2; scalars are represented as 1x1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(int rows, int cols);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double value);
    static Tensor scalar(double value);
    static Tensor row(const std::vector<double>& values);
    static Tensor column(const std::vector<double>& values);

    bool defined() const { return !shape_.empty(); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int rows() const;
    int cols() const;
    size_t size() const { return data_.size(); }

    double& at(int r, int c);
    double at(int r, int c) const;
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double value);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    std::string shape_str() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Raw kernels used by both the autograd ops and plain numeric code.
Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T and a^T * b without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// dst += s * src (same shape)
void add_scaled(Tensor& dst, const Tensor& src, double s);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace mcted
