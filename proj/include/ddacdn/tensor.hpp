#ifndef DDACDN_TENSOR_HPP
#define DDACDN_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ddacdn {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

class Graph;

// Dense float64 tensor, row-major. A tensor with node >= 0 participates in
// the recorded computation graph; node == -1 means a plain constant value.
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    int node = -1;
    Graph* graph = nullptr;

    Tensor() : data(std::make_shared<std::vector<double>>()) {}
    Tensor(Shape s, std::vector<double> v);
    explicit Tensor(double scalar_value);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double v);

    int64_t size() const { return static_cast<int64_t>(data->size()); }
    double scalar() const;
    double operator[](int64_t i) const { return (*data)[static_cast<size_t>(i)]; }
    double& operator[](int64_t i) { return (*data)[static_cast<size_t>(i)]; }
    const std::vector<double>& values() const { return *data; }
};

// Append-only tape of primitive applications. Single-threaded per instance.
class Graph {
public:
    using BackwardFn =
        std::function<void(Graph&, const std::vector<double>& grad_out)>;

    Tensor leaf(Shape s, std::vector<double> v);
    Tensor leaf(const Tensor& value);

    // Registers a result node; backward receives the output gradient and must
    // accumulate into the input nodes via accumulate().
    void record(Tensor& out, const std::vector<int>& inputs, BackwardFn back);

    void backward(const Tensor& loss);
    void accumulate(int node_id, const std::vector<double>& g);
    void accumulate(int node_id, int64_t flat_index, double g);
    bool has_grad(int node_id) const;
    Tensor grad(const Tensor& t) const;
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        std::vector<int> inputs;
        BackwardFn back;
        Shape shape;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
};

// Elementwise binaries; one operand may be a scalar (size 1) broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);

Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor pow_const(const Tensor& a, double p);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reduce_max(const Tensor& a);

Tensor reshape(const Tensor& a, Shape s);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor select(const Tensor& a, int64_t flat_index);  // scalar extraction
Tensor slice_flat(const Tensor& a, int64_t start, int64_t len);  // 1-D contiguous view copy

// (N, Cin, H, W) x (Cout, Cin, kh, kw) -> (N, Cout, H', W'), zero padding
// (k-1)/2 so stride 1 preserves spatial size. bias may be empty.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor global_avg_pool(const Tensor& x);  // (N,C,H,W) -> (N,C)

// Max relative error between analytic gradient of f at x and central finite
// differences: max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|).
double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f,
                  const Tensor& x, double eps = 1e-5);

}  // namespace ddacdn

#endif
