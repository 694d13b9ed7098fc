#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "akspace/rng.hpp"
#include "akspace/tensor.hpp"

namespace akspace {

// Reverse-mode graph over dense tensors. Nodes are stored in construction
// order, which the builder guarantees is topological. Complex data uses a
// leading dimension of 2 (real plane, imaginary plane).

enum class OpKind : uint8_t {
  kInput,
  kParam,
  kAdd,
  kMul,
  kAffine,       // a*x + b
  kRelu,
  kLeakyRelu,    // slope in f0
  kExp,
  kClamp,        // [f0, f1]
  kConv2d,       // stride i0, pad i1, reflect flag i2
  kTConv2d,      // stride i0, pad i1
  kInstanceNorm,
  kConcatC,
  kSliceC,       // channels [i0, i1)
  kGap,
  kBroadcastHW,  // {C,1,1} -> {C,i0,i1}
  kReshape,
  kComplexDft2,
  kComplexIdft2,
  kRowMix,       // (1-S)*a + S*b per row; inputs a, b, mask
  kSpectralMaps, // {2,N,N} image -> {N,N,N} row-band magnitude maps
  kReduceSum,
  kReduceMean,
};

struct Node {
  OpKind op;
  std::vector<int> shape;
  int in0 = -1, in1 = -1, in2 = -1;
  float f0 = 0.f, f1 = 0.f;
  int i0 = 0, i1 = 0, i2 = 0;
  std::string name;  // params and named inputs
};

struct Graph {
  std::vector<Node> nodes;
  int node_count() const { return static_cast<int>(nodes.size()); }
};

class GraphBuilder {
 public:
  int input(std::vector<int> shape, std::string name);
  // f0 carries the uniform init bound; 0 means zero-init
  int param(std::string name, std::vector<int> shape, float init_bound);
  int add(int a, int b);
  int mul(int a, int b);
  int affine(int x, float a, float b);
  int relu(int x);
  int lrelu(int x, float slope);
  int exp_op(int x);
  int clamp(int x, float lo, float hi);
  int conv2d(int x, int w, int b, int stride, int pad, bool reflect);
  int tconv2d(int x, int w, int b, int stride, int pad);
  int instance_norm(int x);
  int concat_c(int a, int b);
  int slice_c(int x, int c0, int c1);
  int gap(int x);
  int broadcast_hw(int x, int h, int w);
  int reshape(int x, std::vector<int> shape);
  int complex_dft2(int x);
  int complex_idft2(int x);
  int row_mix(int a, int b, int mask);
  int spectral_maps(int x);
  int reduce_sum(int x);
  int reduce_mean(int x);

  const Graph& graph() const { return g_; }
  Graph take() { return std::move(g_); }
  const std::vector<int>& shape(int id) const { return g_.nodes[static_cast<size_t>(id)].shape; }

 private:
  int push(Node n);
  Graph g_;
};

template <typename T>
struct ParamStoreT {
  std::map<std::string, BasicTensor<T>> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  BasicTensor<T>& get(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("missing parameter: " + name);
    return it->second;
  }
  const BasicTensor<T>& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("missing parameter: " + name);
    return it->second;
  }

  template <typename U>
  ParamStoreT<U> cast() const {
    ParamStoreT<U> out;
    for (const auto& [k, v] : tensors) out.tensors.emplace(k, v.template cast<U>());
    return out;
  }
};

using ParamStore = ParamStoreT<float>;

// Creates any missing parameters declared by the graph, in node order.
template <typename T>
void init_params(ParamStoreT<T>& store, const Graph& g, Rng& rng);

// Checks that every parameter the graph declares exists with the right shape.
template <typename T>
void audit_params(const ParamStoreT<T>& store, const Graph& g);

template <typename T>
class Session {
 public:
  Session(const Graph* g, const ParamStoreT<T>* store);

  void bind(int input_id, BasicTensor<T> v);
  void forward();
  void zero_grads();
  // Seeds are added to the named nodes' cotangents before the reverse sweep.
  void backward(const std::vector<std::pair<int, BasicTensor<T>>>& seeds);
  void backward_scalar(int node_id);  // seed a {1}-shaped node with 1

  const BasicTensor<T>& value(int id) const;
  const BasicTensor<T>& grad(int id) const;
  bool has_grad(int id) const { return grad_set_[static_cast<size_t>(id)] != 0; }

  const Graph& graph() const { return *g_; }

 private:
  BasicTensor<T>& grad_buf(int id);
  const BasicTensor<T>& in_val(int id) const;
  void eval_node(int id);
  void back_node(int id);

  const Graph* g_;
  const ParamStoreT<T>* store_;
  std::vector<BasicTensor<T>> vals_;
  std::vector<BasicTensor<T>> grads_;
  std::vector<char> bound_;
  std::vector<char> grad_set_;
  bool forwarded_ = false;
};

struct AdamConfig {
  double lr = 0.0006;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a named gradient map.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& params, const std::map<std::string, Tensor>& grads, double lr);
  int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Global-norm clip; returns the pre-clip norm.
double clip_grad_norm(std::map<std::string, Tensor>& grads, double max_norm);

}  // namespace akspace
