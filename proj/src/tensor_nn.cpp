#include "qmgen/tensor_nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qmgen::nn {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeMismatch(msg);
}

long long product(const std::vector<int>& shape) {
  long long p = 1;
  for (int d : shape) p *= d;
  return p;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  require(product(shape) == static_cast<long long>(data.size()),
          "tensor data does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
  return Tensor(shape, std::vector<double>(static_cast<std::size_t>(product(shape)), 0.0));
}

Tensor Tensor::full(const std::vector<int>& shape, double v) {
  return Tensor(shape, std::vector<double>(static_cast<std::size_t>(product(shape)), v));
}

int Tensor::numel() const { return static_cast<int>(data.size()); }

bool Tensor::finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

int Tape::push(Tensor value, std::vector<int> parents, Vjp vjp) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) {
    n.needs = n.needs || nodes_[static_cast<std::size_t>(p)].needs;
  }
  n.parents = std::move(parents);
  n.vjp = std::move(vjp);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.needs = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::add(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "add: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
  return push(std::move(out), {a, b}, [](Tape&, int, int g) {
    return std::vector<int>{g, g};
  });
}

int Tape::sub(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "sub: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= tb.data[i];
  return push(std::move(out), {a, b}, [](Tape& t, int, int g) {
    return std::vector<int>{g, t.neg(g)};
  });
}

int Tape::mul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.shape == tb.shape, "mul: " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
  Tensor out = ta;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
  return push(std::move(out), {a, b}, [a, b](Tape& t, int, int g) {
    return std::vector<int>{t.mul(g, b), t.mul(g, a)};
  });
}

int Tape::affine(int a, double scale, double shift) {
  Tensor out = value(a);
  for (double& v : out.data) v = v * scale + shift;
  return push(std::move(out), {a}, [scale](Tape& t, int, int g) {
    return std::vector<int>{t.affine(g, scale, 0.0)};
  });
}

int Tape::matmul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2 && ta.dim(1) == tb.dim(0),
          "matmul: " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = ta.data[static_cast<std::size_t>(i) * k + p];
      if (av == 0.0) continue;
      const double* brow = tb.data.data() + static_cast<std::size_t>(p) * n;
      double* orow = out.data.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return push(std::move(out), {a, b}, [a, b](Tape& t, int, int g) {
    return std::vector<int>{t.matmul(g, t.transpose2d(b)), t.matmul(t.transpose2d(a), g)};
  });
}

int Tape::bmm(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 3 && tb.rank() == 3 && ta.dim(0) == tb.dim(0) && ta.dim(2) == tb.dim(1),
          "bmm: " + shape_str(ta.shape) + " x " + shape_str(tb.shape));
  const int bsz = ta.dim(0), m = ta.dim(1), k = ta.dim(2), n = tb.dim(2);
  Tensor out = Tensor::zeros({bsz, m, n});
  for (int s = 0; s < bsz; ++s) {
    const double* A = ta.data.data() + static_cast<std::size_t>(s) * m * k;
    const double* B = tb.data.data() + static_cast<std::size_t>(s) * k * n;
    double* O = out.data.data() + static_cast<std::size_t>(s) * m * n;
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const double av = A[static_cast<std::size_t>(i) * k + p];
        if (av == 0.0) continue;
        const double* brow = B + static_cast<std::size_t>(p) * n;
        double* orow = O + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  return push(std::move(out), {a, b}, [a, b](Tape& t, int, int g) {
    return std::vector<int>{t.bmm(g, t.transpose_last2(b)), t.bmm(t.transpose_last2(a), g)};
  });
}

int Tape::transpose2d(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "transpose2d needs a matrix, got " + shape_str(ta.shape));
  const int m = ta.dim(0), n = ta.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out.data[static_cast<std::size_t>(j) * m + i] = ta.data[static_cast<std::size_t>(i) * n + j];
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.transpose2d(g)};
  });
}

int Tape::transpose_last2(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 3, "transpose_last2 needs rank 3, got " + shape_str(ta.shape));
  const int bsz = ta.dim(0), m = ta.dim(1), n = ta.dim(2);
  Tensor out = Tensor::zeros({bsz, n, m});
  for (int s = 0; s < bsz; ++s) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        out.data[(static_cast<std::size_t>(s) * n + j) * m + i] =
            ta.data[(static_cast<std::size_t>(s) * m + i) * n + j];
      }
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.transpose_last2(g)};
  });
}

int Tape::reshape(int a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  require(product(shape) == static_cast<long long>(ta.data.size()),
          "reshape: " + shape_str(ta.shape) + " -> " + shape_str(shape));
  Tensor out(shape, ta.data);
  auto original = ta.shape;
  return push(std::move(out), {a}, [original](Tape& t, int, int g) {
    return std::vector<int>{t.reshape(g, original)};
  });
}

int Tape::tanh_op(int a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(std::move(out), {a}, [](Tape& t, int self, int g) {
    int one_minus_sq = t.affine(t.square(self), -1.0, 1.0);
    return std::vector<int>{t.mul(g, one_minus_sq)};
  });
}

int Tape::sigmoid_op(int a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(out), {a}, [](Tape& t, int self, int g) {
    int deriv = t.mul(self, t.affine(self, -1.0, 1.0));  // s(1-s)
    return std::vector<int>{t.mul(g, deriv)};
  });
}

int Tape::reciprocal(int a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / v;
  return push(std::move(out), {a}, [](Tape& t, int self, int g) {
    return std::vector<int>{t.neg(t.mul(g, t.square(self)))};
  });
}

int Tape::sqrt_eps(int a, double eps) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::sqrt(v + eps);
  return push(std::move(out), {a}, [](Tape& t, int self, int g) {
    return std::vector<int>{t.affine(t.mul(g, t.reciprocal(self)), 0.5, 0.0)};
  });
}

int Tape::softmax_lastdim(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 1, "softmax needs data");
  const int k = ta.shape.back();
  const int rows = ta.numel() / k;
  Tensor out = ta;
  for (int r = 0; r < rows; ++r) {
    double* row = out.data.data() + static_cast<std::size_t>(r) * k;
    double mx = row[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (int i = 0; i < k; ++i) row[i] /= sum;
  }
  return push(std::move(out), {a}, [](Tape& t, int self, int g) {
    int prod = t.mul(self, g);
    int row_sum = t.sum_lastdim(prod);
    return std::vector<int>{t.sub(prod, t.mul_bcast_last(self, row_sum))};
  });
}

int Tape::add_bias(int a, int bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  require(tb.rank() == 1 && ta.rank() >= 1 && ta.shape.back() == tb.dim(0),
          "add_bias: " + shape_str(ta.shape) + " + " + shape_str(tb.shape));
  const int c = tb.dim(0);
  Tensor out = ta;
  const int rows = ta.numel() / c;
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < c; ++i) {
      out.data[static_cast<std::size_t>(r) * c + i] += tb.data[static_cast<std::size_t>(i)];
    }
  }
  return push(std::move(out), {a, bias}, [c](Tape& t, int, int g) {
    const int rows = t.value(g).numel() / c;
    int flat = t.reshape(g, {rows, c});
    return std::vector<int>{g, t.sum_axis0(flat)};
  });
}

int Tape::sum_all(int a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.data) s += v;
  auto shape = ta.shape;
  return push(Tensor::scalar(s), {a}, [shape](Tape& t, int, int g) {
    return std::vector<int>{t.bcast_scalar(g, shape)};
  });
}

int Tape::mean_all(int a) {
  return affine(sum_all(a), 1.0 / value(a).numel(), 0.0);
}

int Tape::bcast_scalar(int a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  require(ta.numel() == 1, "bcast_scalar needs a scalar");
  Tensor out = Tensor::full(shape, ta.data[0]);
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sum_all(g)};
  });
}

int Tape::sum_lastdim(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 2, "sum_lastdim needs rank >= 2, got " + shape_str(ta.shape));
  const int k = ta.shape.back();
  std::vector<int> out_shape(ta.shape.begin(), ta.shape.end() - 1);
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < out.numel(); ++r) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += ta.data[static_cast<std::size_t>(r) * k + i];
    out.data[static_cast<std::size_t>(r)] = s;
  }
  return push(std::move(out), {a}, [k](Tape& t, int, int g) {
    return std::vector<int>{t.bcast_lastdim(g, k)};
  });
}

int Tape::bcast_lastdim(int a, int k) {
  const Tensor& ta = value(a);
  std::vector<int> out_shape = ta.shape;
  out_shape.push_back(k);
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < ta.numel(); ++r) {
    for (int i = 0; i < k; ++i) {
      out.data[static_cast<std::size_t>(r) * k + i] = ta.data[static_cast<std::size_t>(r)];
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sum_lastdim(g)};
  });
}

int Tape::mul_bcast_last(int a, int s) {
  const Tensor& ta = value(a);
  const Tensor& ts = value(s);
  require(ta.rank() >= 2, "mul_bcast_last needs rank >= 2");
  std::vector<int> lead(ta.shape.begin(), ta.shape.end() - 1);
  require(lead == ts.shape, "mul_bcast_last: " + shape_str(ta.shape) + " * " +
                                shape_str(ts.shape));
  const int k = ta.shape.back();
  Tensor out = ta;
  for (int r = 0; r < ts.numel(); ++r) {
    const double f = ts.data[static_cast<std::size_t>(r)];
    for (int i = 0; i < k; ++i) out.data[static_cast<std::size_t>(r) * k + i] *= f;
  }
  return push(std::move(out), {a, s}, [a, s](Tape& t, int, int g) {
    return std::vector<int>{t.mul_bcast_last(g, s), t.sum_lastdim(t.mul(g, a))};
  });
}

int Tape::sum_axis1(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 3, "sum_axis1 needs rank 3, got " + shape_str(ta.shape));
  const int b = ta.dim(0), n = ta.dim(1), f = ta.dim(2);
  Tensor out = Tensor::zeros({b, f});
  for (int s = 0; s < b; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < f; ++j) {
        out.data[static_cast<std::size_t>(s) * f + j] +=
            ta.data[(static_cast<std::size_t>(s) * n + i) * f + j];
      }
    }
  }
  return push(std::move(out), {a}, [n](Tape& t, int, int g) {
    return std::vector<int>{t.bcast_axis1(g, n)};
  });
}

int Tape::bcast_axis1(int a, int n) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "bcast_axis1 needs rank 2, got " + shape_str(ta.shape));
  const int b = ta.dim(0), f = ta.dim(1);
  Tensor out = Tensor::zeros({b, n, f});
  for (int s = 0; s < b; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < f; ++j) {
        out.data[(static_cast<std::size_t>(s) * n + i) * f + j] =
            ta.data[static_cast<std::size_t>(s) * f + j];
      }
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sum_axis1(g)};
  });
}

int Tape::sum_axis0(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "sum_axis0 needs rank 2, got " + shape_str(ta.shape));
  const int r = ta.dim(0), c = ta.dim(1);
  Tensor out = Tensor::zeros({c});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      out.data[static_cast<std::size_t>(j)] += ta.data[static_cast<std::size_t>(i) * c + j];
    }
  }
  return push(std::move(out), {a}, [r](Tape& t, int, int g) {
    return std::vector<int>{t.bcast_axis0(g, r)};
  });
}

int Tape::bcast_axis0(int a, int r) {
  const Tensor& ta = value(a);
  require(ta.rank() == 1, "bcast_axis0 needs rank 1, got " + shape_str(ta.shape));
  const int c = ta.dim(0);
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      out.data[static_cast<std::size_t>(i) * c + j] = ta.data[static_cast<std::size_t>(j)];
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sum_axis0(g)};
  });
}

int Tape::sum_per_sample(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 2, "sum_per_sample needs rank >= 2");
  const int b = ta.dim(0);
  const int rest = ta.numel() / b;
  Tensor out = Tensor::zeros({b});
  for (int s = 0; s < b; ++s) {
    double sum = 0.0;
    for (int i = 0; i < rest; ++i) sum += ta.data[static_cast<std::size_t>(s) * rest + i];
    out.data[static_cast<std::size_t>(s)] = sum;
  }
  std::vector<int> rest_shape(ta.shape.begin() + 1, ta.shape.end());
  return push(std::move(out), {a}, [rest_shape](Tape& t, int, int g) {
    return std::vector<int>{t.bcast_per_sample(g, rest_shape)};
  });
}

int Tape::bcast_per_sample(int a, std::vector<int> rest) {
  const Tensor& ta = value(a);
  require(ta.rank() == 1, "bcast_per_sample needs rank 1");
  const int b = ta.dim(0);
  std::vector<int> out_shape{b};
  out_shape.insert(out_shape.end(), rest.begin(), rest.end());
  const int rest_n = static_cast<int>(product(rest));
  Tensor out = Tensor::zeros(out_shape);
  for (int s = 0; s < b; ++s) {
    for (int i = 0; i < rest_n; ++i) {
      out.data[static_cast<std::size_t>(s) * rest_n + i] = ta.data[static_cast<std::size_t>(s)];
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sum_per_sample(g)};
  });
}

int Tape::slice_channel_last(int a, int c) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 2, "slice_channel_last needs rank >= 2");
  const int channels = ta.shape.back();
  require(c >= 0 && c < channels, "channel out of range");
  std::vector<int> out_shape(ta.shape.begin(), ta.shape.end() - 1);
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < out.numel(); ++r) {
    out.data[static_cast<std::size_t>(r)] =
        ta.data[static_cast<std::size_t>(r) * channels + c];
  }
  return push(std::move(out), {a}, [c, channels](Tape& t, int, int g) {
    return std::vector<int>{t.pad_channel_last(g, c, channels)};
  });
}

int Tape::pad_channel_last(int a, int c, int channels) {
  const Tensor& ta = value(a);
  require(c >= 0 && c < channels, "channel out of range");
  std::vector<int> out_shape = ta.shape;
  out_shape.push_back(channels);
  Tensor out = Tensor::zeros(out_shape);
  for (int r = 0; r < ta.numel(); ++r) {
    out.data[static_cast<std::size_t>(r) * channels + c] = ta.data[static_cast<std::size_t>(r)];
  }
  return push(std::move(out), {a}, [c](Tape& t, int, int g) {
    return std::vector<int>{t.slice_channel_last(g, c)};
  });
}

int Tape::sym_axes12(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 4 && ta.dim(1) == ta.dim(2),
          "sym_axes12 needs (B,N,N,C), got " + shape_str(ta.shape));
  const int b = ta.dim(0), n = ta.dim(1), c = ta.dim(3);
  Tensor out = ta;
  for (int s = 0; s < b; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int ch = 0; ch < c; ++ch) {
          std::size_t ij = ((static_cast<std::size_t>(s) * n + i) * n + j) * c + ch;
          std::size_t ji = ((static_cast<std::size_t>(s) * n + j) * n + i) * c + ch;
          out.data[ij] = 0.5 * (ta.data[ij] + ta.data[ji]);
        }
      }
    }
  }
  return push(std::move(out), {a}, [](Tape& t, int, int g) {
    return std::vector<int>{t.sym_axes12(g)};
  });
}

int Tape::straight_through_onehot(int a) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 1, "straight_through_onehot needs data");
  const int k = ta.shape.back();
  Tensor out = Tensor::zeros(ta.shape);
  const int rows = ta.numel() / k;
  for (int r = 0; r < rows; ++r) {
    const double* row = ta.data.data() + static_cast<std::size_t>(r) * k;
    int best = 0;
    for (int i = 1; i < k; ++i) {
      if (row[i] > row[best]) best = i;
    }
    out.data[static_cast<std::size_t>(r) * k + best] = 1.0;
  }
  return push(std::move(out), {a}, [](Tape&, int, int g) {
    return std::vector<int>{g};
  });
}

int Tape::matmul_lastdim(int a, int w) {
  const Tensor& ta = value(a);
  const Tensor& tw = value(w);
  require(ta.rank() >= 2 && tw.rank() == 2 && ta.shape.back() == tw.dim(0),
          "matmul_lastdim: " + shape_str(ta.shape) + " x " + shape_str(tw.shape));
  std::vector<int> out_shape = ta.shape;
  out_shape.back() = tw.dim(1);
  const int rows = ta.numel() / ta.shape.back();
  int flat = reshape(a, {rows, ta.shape.back()});
  int prod = matmul(flat, w);
  return reshape(prod, out_shape);
}

int Tape::quantum_bridge(int params_leaf, Tensor z_batch, const CircuitSpec& spec,
                         const QuantumBackend& backend) {
  const Tensor& tp = value(params_leaf);
  require(tp.numel() == spec.param_count(), "quantum_bridge: params size mismatch");
  require(z_batch.rank() == 2 && z_batch.dim(1) == spec.qubits,
          "quantum_bridge: z shape mismatch " + shape_str(z_batch.shape));
  const int batch = z_batch.dim(0);
  CircuitParams params{tp.data};
  Tensor out({batch, spec.qubits},
             backend.forward_batch(z_batch.data, batch, spec, params));
  const QuantumBackend* backend_ptr = &backend;
  return push(std::move(out), {params_leaf},
              [z = std::move(z_batch), spec, backend_ptr, batch, params_leaf](Tape& t, int,
                                                                              int g) {
                CircuitParams now{t.value(params_leaf).data};
                Tensor grad({spec.param_count()},
                            backend_ptr->grad_batch(z.data, batch, spec, now,
                                                    t.value(g).data));
                return std::vector<int>{t.constant(std::move(grad))};
              });
}

std::vector<int> Tape::gradients(int root, const std::vector<int>& wrt) {
  require(value(root).numel() == 1, "gradients: root must be scalar");
  std::map<int, int> gradmap;
  gradmap[root] = constant(Tensor::scalar(1.0));
  for (int id = root; id >= 0; --id) {
    auto it = gradmap.find(id);
    if (it == gradmap.end()) continue;
    // copy: vjp calls may reallocate nodes_
    if (!nodes_[static_cast<std::size_t>(id)].vjp) continue;
    if (!nodes_[static_cast<std::size_t>(id)].needs) continue;
    Vjp vjp = nodes_[static_cast<std::size_t>(id)].vjp;
    std::vector<int> parents = nodes_[static_cast<std::size_t>(id)].parents;
    int upstream = it->second;
    std::vector<int> contribs = vjp(*this, id, upstream);
    for (std::size_t k = 0; k < parents.size(); ++k) {
      int p = parents[k];
      int c = k < contribs.size() ? contribs[k] : -1;
      if (c < 0) continue;
      if (!nodes_[static_cast<std::size_t>(p)].needs) continue;
      auto found = gradmap.find(p);
      if (found == gradmap.end()) {
        gradmap[p] = c;
      } else {
        found->second = add(found->second, c);
      }
    }
  }
  std::vector<int> out;
  out.reserve(wrt.size());
  for (int w : wrt) {
    auto found = gradmap.find(w);
    if (found != gradmap.end()) {
      out.push_back(found->second);
    } else {
      out.push_back(constant(Tensor::zeros(value(w).shape)));
    }
  }
  return out;
}

int ParamRegistry::bind(Tape& tape, Tensor& param) {
  auto it = index_.find(&param);
  if (it != index_.end()) return it->second;
  int id = tape.leaf(param, trainable_);
  entries_.emplace_back(&param, id);
  index_[&param] = id;
  return id;
}

DenseLayer DenseLayer::init(int fan_in, int fan_out, Activation act, Rng& rng) {
  DenseLayer layer;
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  layer.weights = Tensor::zeros({fan_in, fan_out});
  for (double& v : layer.weights.data) v = rng.uniform(-bound, bound);
  layer.bias = Tensor::zeros({fan_out});
  for (double& v : layer.bias.data) v = rng.uniform(-bound, bound);
  layer.act = act;
  return layer;
}

int DenseLayer::forward(Tape& tape, ParamRegistry& reg, int input) const {
  int w = reg.bind(tape, const_cast<Tensor&>(weights));
  int b = reg.bind(tape, const_cast<Tensor&>(bias));
  int pre = tape.add_bias(tape.matmul_lastdim(input, w), b);
  return act == Activation::Tanh ? tape.tanh_op(pre) : pre;
}

RgcnLayer RgcnLayer::init(int fan_in, int fan_out, int bond_channels, Activation act, Rng& rng) {
  RgcnLayer layer;
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto init_mat = [&] {
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };
  layer.w_self = init_mat();
  for (int y = 1; y < bond_channels; ++y) layer.w_rel.push_back(init_mat());
  layer.bias = Tensor::zeros({fan_out});
  for (double& v : layer.bias.data) v = rng.uniform(-bound, bound);
  layer.act = act;
  return layer;
}

int RgcnLayer::forward(Tape& tape, ParamRegistry& reg, int features, int adjacency) const {
  const Tensor& tf = tape.value(features);
  const Tensor& ta = tape.value(adjacency);
  require(tf.rank() == 3 && ta.rank() == 4 && ta.dim(3) == static_cast<int>(w_rel.size()) + 1,
          "rgcn: features " + shape_str(tf.shape) + " adjacency " + shape_str(ta.shape));

  int w_self_id = reg.bind(tape, const_cast<Tensor&>(w_self));
  int bias_id = reg.bind(tape, const_cast<Tensor&>(bias));

  std::vector<int> channels;
  int degree = -1;
  for (std::size_t y = 1; y <= w_rel.size(); ++y) {
    int ay = tape.slice_channel_last(adjacency, static_cast<int>(y));
    channels.push_back(ay);
    int dy = tape.sum_lastdim(ay);
    degree = degree < 0 ? dy : tape.add(degree, dy);
  }
  int norm = tape.reciprocal(tape.affine(degree, 1.0, 1.0));  // 1/(1 + in-degree)

  int total = tape.matmul_lastdim(features, w_self_id);
  for (std::size_t y = 0; y < w_rel.size(); ++y) {
    int w_y = reg.bind(tape, const_cast<Tensor&>(w_rel[y]));
    int msg = tape.bmm(channels[y], features);
    int scaled = tape.mul_bcast_last(msg, norm);
    total = tape.add(total, tape.matmul_lastdim(scaled, w_y));
  }
  int pre = tape.add_bias(total, bias_id);
  return act == Activation::Tanh ? tape.tanh_op(pre) : pre;
}

int RgcnLayer::param_count() const {
  int n = w_self.numel() + bias.numel();
  for (const auto& w : w_rel) n += w.numel();
  return n;
}

GraphAggregate GraphAggregate::init(int fan_in, int fan_out, Rng& rng) {
  GraphAggregate agg;
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto init_mat = [&] {
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };
  auto init_vec = [&] {
    Tensor t = Tensor::zeros({fan_out});
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };
  agg.w_gate = init_mat();
  agg.b_gate = init_vec();
  agg.w_val = init_mat();
  agg.b_val = init_vec();
  return agg;
}

int GraphAggregate::forward(Tape& tape, ParamRegistry& reg, int node_feats) const {
  require(tape.value(node_feats).rank() == 3, "graph_aggregate needs (B,N,F)");
  int wg = reg.bind(tape, const_cast<Tensor&>(w_gate));
  int bg = reg.bind(tape, const_cast<Tensor&>(b_gate));
  int wv = reg.bind(tape, const_cast<Tensor&>(w_val));
  int bv = reg.bind(tape, const_cast<Tensor&>(b_val));
  int gate = tape.sigmoid_op(tape.add_bias(tape.matmul_lastdim(node_feats, wg), bg));
  int val = tape.tanh_op(tape.add_bias(tape.matmul_lastdim(node_feats, wv), bv));
  return tape.sum_axis1(tape.mul(gate, val));
}

int GraphAggregate::param_count() const {
  return w_gate.numel() + b_gate.numel() + w_val.numel() + b_val.numel();
}

int gumbel_softmax(Tape& tape, int logits, double temperature, Rng& rng, bool hard,
                   const Tensor* injected_noise) {
  if (!(temperature > 0.0)) {
    throw NonPositiveTemperature("gumbel_softmax temperature must be positive, got " +
                                 std::to_string(temperature));
  }
  const Tensor& tl = tape.value(logits);
  Tensor noise;
  if (injected_noise != nullptr) {
    require(injected_noise->shape == tl.shape, "injected noise shape mismatch");
    noise = *injected_noise;
  } else {
    noise = Tensor::zeros(tl.shape);
    for (double& v : noise.data) v = rng.gumbel();
  }
  int noisy = tape.add(logits, tape.constant(std::move(noise)));
  int soft = tape.softmax_lastdim(tape.affine(noisy, 1.0 / temperature, 0.0));
  return hard ? tape.straight_through_onehot(soft) : soft;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
               double lr_factor) {
  require(param.shape == grad.shape, "adam_step: param/grad shape mismatch");
  if (state.first_moment.data.empty()) {
    state.first_moment = Tensor::zeros(param.shape);
    state.second_moment = Tensor::zeros(param.shape);
  }
  require(state.first_moment.shape == param.shape, "adam_step: state shape mismatch");
  state.step_count += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
  const double lr = cfg.lr * lr_factor;
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    double g = grad.data[i];
    double& m = state.first_moment.data[i];
    double& v = state.second_moment.data[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    double mhat = m / bc1;
    double vhat = v / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double clip_grad_norm(std::vector<Tensor*> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    for (double v : g->data) sq += v * v;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (Tensor* g : grads) {
      for (double& v : g->data) v *= scale;
    }
  }
  return norm;
}

double LrSchedule::factor(long step) const {
  if (step < warmup_steps) {
    return warmup_steps == 0 ? 1.0 : static_cast<double>(step) / warmup_steps;
  }
  long after = step - warmup_steps;
  if (after <= constant_steps) return 1.0;
  return std::pow(decay_rate, static_cast<double>(after - constant_steps));
}

}  // namespace qmgen::nn
