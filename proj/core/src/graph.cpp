#include "labelaug/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace labelaug {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, const char* op) {
    if (s.size() != 4) {
        throw ShapeError(std::string(op) + ": expected a rank-4 (N, C, H, W) tensor, got " + shape_str(s));
    }
}

// col is (C*9, H*W): row c*9 + ky*3 + kx holds the input shifted by (ky-1, kx-1).
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t height, std::size_t width, T* col) {
    const std::size_t hw = height * width;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = img + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
                const long dy = ky - 1;
                const long dx = kx - 1;
                const long w = static_cast<long>(width);
                const long x0 = std::max(0L, -dx);
                const long x1 = std::min(w, w - dx);
                for (long y = 0; y < static_cast<long>(height); ++y) {
                    T* out = row + y * w;
                    const long sy = y + dy;
                    if (sy < 0 || sy >= static_cast<long>(height)) {
                        std::fill(out, out + w, T(0));
                        continue;
                    }
                    const T* src = plane + sy * w;
                    for (long x = 0; x < x0; ++x) out[x] = T(0);
                    for (long x = x0; x < x1; ++x) out[x] = src[x + dx];
                    for (long x = x1; x < w; ++x) out[x] = T(0);
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, std::size_t channels, std::size_t height, std::size_t width, T* img) {
    const std::size_t hw = height * width;
    for (std::size_t c = 0; c < channels; ++c) {
        T* plane = img + c * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = col + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
                const long dy = ky - 1;
                const long dx = kx - 1;
                const long w = static_cast<long>(width);
                const long x0 = std::max(0L, -dx);
                const long x1 = std::min(w, w - dx);
                for (long y = 0; y < static_cast<long>(height); ++y) {
                    const long sy = y + dy;
                    if (sy < 0 || sy >= static_cast<long>(height)) continue;
                    const T* in = row + y * w;
                    T* dst = plane + sy * w;
                    for (long x = x0; x < x1; ++x) dst[x + dx] += in[x];
                }
            }
        }
    }
}

template <typename T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

template <typename T>
BceWeights<T> BceWeights<T>::broadcast(std::size_t n, std::span<const T> per_label) {
    const std::size_t k = per_label.size();
    BceWeights w{Tensor<T>({n, k}), Tensor<T>({n, k}, T(1))};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) w.pos_weight[i * k + j] = per_label[j];
    }
    return w;
}

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad, std::function<void(Graph&, Node&)> bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(Var v) {
    Node& n = node(v);
    if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
    return push(std::move(value), false);
}

template <typename T>
Var Graph<T>::leaf(Tensor<T> value) {
    return push(std::move(value), true);
}

template <typename T>
Var Graph<T>::parameter(Parameter<T>& param) {
    Var v = push(param.value, true);
    node(v).param = &param;
    return v;
}

template <typename T>
Var Graph<T>::conv2d(Var input, Var weight, Var bias) {
    const Tensor<T>& x = value(input);
    const Tensor<T>& w = value(weight);
    const Tensor<T>& b = value(bias);
    require_rank4(x.shape(), "conv2d input");
    require_rank4(w.shape(), "conv2d weight");
    if (w.dim(2) != 3 || w.dim(3) != 3) {
        throw ShapeError("conv2d: kernel must be 3x3, got weight " + shape_str(w.shape()));
    }
    if (w.dim(1) != x.dim(1)) {
        throw ShapeError("conv2d: input has " + std::to_string(x.dim(1)) + " channels but weight " +
                         shape_str(w.shape()) + " expects " + std::to_string(w.dim(1)));
    }
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) {
        throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " does not match " +
                         std::to_string(w.dim(0)) + " output channels");
    }
    const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), cout = w.dim(0);
    const std::size_t hw = h * wd, k = cin * 9;

    Tensor<T> out({batch, cout, h, wd});
    AlignedVector<T> col(k * hw);
    ConstMatMap<T> wm(w.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(k));
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(b.data(), static_cast<Eigen::Index>(cout));
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(x.data() + n * cin * hw, cin, h, wd, col.data());
        ConstMatMap<T> cm(col.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
        MatMap<T> om(out.data() + n * cout * hw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
        om.noalias() = wm * cm;
        om.colwise() += bv;
    }

    const bool rg = node(input).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
    return push(std::move(out), rg, [=](Graph& g, Node& self) {
        const Tensor<T>& xv = g.value(input);
        const Tensor<T>& wv = g.value(weight);
        const bool need_x = g.node(input).requires_grad;
        const bool need_w = g.node(weight).requires_grad;
        const bool need_b = g.node(bias).requires_grad;
        T* dx = need_x ? g.grad_buffer(input).data() : nullptr;
        T* dw = need_w ? g.grad_buffer(weight).data() : nullptr;
        T* db = need_b ? g.grad_buffer(bias).data() : nullptr;

        ConstMatMap<T> wm2(wv.data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(k));
        AlignedVector<T> col2(k * hw);
        for (std::size_t n = 0; n < batch; ++n) {
            ConstMatMap<T> go(self.grad.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                              static_cast<Eigen::Index>(hw));
            if (need_b) {
                Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbv(db, static_cast<Eigen::Index>(cout));
                dbv += go.rowwise().sum();
            }
            if (need_w) {
                im2col(xv.data() + n * cin * hw, cin, h, wd, col2.data());
                ConstMatMap<T> cm2(col2.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
                MatMap<T> dwm(dw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(k));
                dwm.noalias() += go * cm2.transpose();
            }
            if (need_x) {
                MatMap<T> dcol(col2.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(hw));
                dcol.noalias() = wm2.transpose() * go;
                col2im_add(col2.data(), cin, h, wd, dx + n * cin * hw);
            }
        }
    });
}

template <typename T>
Var Graph<T>::relu(Var input) {
    const Tensor<T>& x = value(input);
    Tensor<T> out(x.shape());
    T margin = margin_;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T(0) ? x[i] : T(0);
        margin = std::min(margin, std::abs(x[i]));
    }
    margin_ = margin;
    return push(std::move(out), node(input).requires_grad, [input](Graph& g, Node& self) {
        if (!g.node(input).requires_grad) return;
        Tensor<T>& dx = g.grad_buffer(input);
        const Tensor<T>& xv = g.value(input);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (xv[i] > T(0)) dx[i] += self.grad[i];
        }
    });
}

template <typename T>
Var Graph<T>::maxpool2(Var input) {
    const Tensor<T>& x = value(input);
    require_rank4(x.shape(), "maxpool2");
    const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool2: spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                         " is odd; pad the input to even height and width");
    }
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor<T> out({batch, ch, oh, ow});
    std::vector<std::uint32_t> arg(out.size());
    T margin = margin_;
    std::size_t o = 0;
    for (std::size_t p = 0; p < batch * ch; ++p) {
        const T* plane = x.data() + p * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx, ++o) {
                const std::size_t idx[4] = {(2 * y) * w + 2 * xx, (2 * y) * w + 2 * xx + 1,
                                            (2 * y + 1) * w + 2 * xx, (2 * y + 1) * w + 2 * xx + 1};
                std::size_t best = idx[0];
                for (int q = 1; q < 4; ++q) {
                    if (plane[idx[q]] > plane[best]) best = idx[q];
                }
                T second = -std::numeric_limits<T>::infinity();
                for (auto q : idx) {
                    if (q != best) second = std::max(second, plane[q]);
                }
                // ties at exactly zero come from inactive relu units, whose own margin is tracked by relu
                if (plane[best] != T(0) || second != T(0)) margin = std::min(margin, plane[best] - second);
                out[o] = plane[best];
                arg[o] = static_cast<std::uint32_t>(p * h * w + best);
            }
        }
    }
    margin_ = margin;
    return push(std::move(out), node(input).requires_grad,
                [input, arg = std::move(arg)](Graph& g, Node& self) {
                    if (!g.node(input).requires_grad) return;
                    Tensor<T>& dx = g.grad_buffer(input);
                    for (std::size_t i = 0; i < arg.size(); ++i) dx[arg[i]] += self.grad[i];
                });
}

template <typename T>
Var Graph<T>::upsample2(Var input) {
    const Tensor<T>& x = value(input);
    require_rank4(x.shape(), "upsample2");
    const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = 2 * h, ow = 2 * w;
    Tensor<T> out({x.dim(0), x.dim(1), oh, ow});
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = x.data() + p * h * w;
        T* dst = out.data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[(y / 2) * w + xx / 2];
        }
    }
    return push(std::move(out), node(input).requires_grad, [=](Graph& g, Node& self) {
        if (!g.node(input).requires_grad) return;
        Tensor<T>& dx = g.grad_buffer(input);
        for (std::size_t p = 0; p < planes; ++p) {
            const T* go = self.grad.data() + p * oh * ow;
            T* d = dx.data() + p * h * w;
            for (std::size_t y = 0; y < oh; ++y) {
                for (std::size_t xx = 0; xx < ow; ++xx) d[(y / 2) * w + xx / 2] += go[y * ow + xx];
            }
        }
    });
}

template <typename T>
Var Graph<T>::concat_channels(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    require_rank4(av.shape(), "concat_channels");
    require_rank4(bv.shape(), "concat_channels");
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3)) {
        throw ShapeError("concat_channels: N/H/W mismatch between " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
    }
    const std::size_t batch = av.dim(0), ca = av.dim(1), cb = bv.dim(1), hw = av.dim(2) * av.dim(3);
    Tensor<T> out({batch, ca + cb, av.dim(2), av.dim(3)});
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(av.data() + n * ca * hw, ca * hw, out.data() + n * (ca + cb) * hw);
        std::copy_n(bv.data() + n * cb * hw, cb * hw, out.data() + n * (ca + cb) * hw + ca * hw);
    }
    const bool rg = node(a).requires_grad || node(b).requires_grad;
    return push(std::move(out), rg, [=](Graph& g, Node& self) {
        const T* go = self.grad.data();
        if (g.node(a).requires_grad) {
            T* da = g.grad_buffer(a).data();
            for (std::size_t n = 0; n < batch; ++n) {
                const T* src = go + n * (ca + cb) * hw;
                for (std::size_t i = 0; i < ca * hw; ++i) da[n * ca * hw + i] += src[i];
            }
        }
        if (g.node(b).requires_grad) {
            T* db = g.grad_buffer(b).data();
            for (std::size_t n = 0; n < batch; ++n) {
                const T* src = go + n * (ca + cb) * hw + ca * hw;
                for (std::size_t i = 0; i < cb * hw; ++i) db[n * cb * hw + i] += src[i];
            }
        }
    });
}

template <typename T>
Var Graph<T>::weighted_bce_with_logits(Var logits, const Tensor<T>& targets, const BceWeights<T>& weights) {
    const Tensor<T>& z = value(logits);
    require_rank4(z.shape(), "weighted_bce_with_logits");
    if (targets.shape() != z.shape()) {
        throw ShapeError("weighted_bce_with_logits: targets " + shape_str(targets.shape()) +
                         " do not match logits " + shape_str(z.shape()));
    }
    const std::size_t batch = z.dim(0), k = z.dim(1), hw = z.dim(2) * z.dim(3);
    const Shape wshape{batch, k};
    if (weights.pos_weight.shape() != wshape || weights.channel_mask.shape() != wshape) {
        throw ShapeError("weighted_bce_with_logits: weights must have shape " + shape_str(wshape));
    }

    const T inv_count = T(1) / static_cast<T>(z.size());
    Tensor<T> dz(z.shape());
    double total = 0.0;
    for (std::size_t c = 0; c < batch * k; ++c) {
        const T mask = weights.channel_mask[c];
        const T pw = weights.pos_weight[c];
        if (mask != T(0) && mask != T(1)) throw std::invalid_argument("weighted_bce_with_logits: channel mask must be 0 or 1");
        if (mask == T(1) && !(pw > T(0))) {
            throw std::invalid_argument("weighted_bce_with_logits: positive weights must be > 0");
        }
        for (std::size_t i = c * hw; i < (c + 1) * hw; ++i) {
            const T zi = z[i];
            const T yi = targets[i];
            if (!std::isfinite(zi)) throw NumericError("weighted_bce_with_logits: non-finite logit");
            if (yi != T(0) && yi != T(1)) {
                throw DataError("weighted_bce_with_logits: target value " + std::to_string(yi) + " is not 0 or 1");
            }
            if (mask == T(0)) continue;
            if (yi == T(1)) {
                total += static_cast<double>(pw * softplus(-zi));
                dz[i] = pw * (sigmoid(zi) - T(1)) * inv_count;
            } else {
                total += static_cast<double>(softplus(zi));
                dz[i] = sigmoid(zi) * inv_count;
            }
        }
    }
    Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(z.size())));
    return push(std::move(out), node(logits).requires_grad,
                [logits, dz = std::move(dz)](Graph& g, Node& self) {
                    if (!g.node(logits).requires_grad) return;
                    Tensor<T>& d = g.grad_buffer(logits);
                    const T up = self.grad[0];
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up * dz[i];
                });
}

template <typename T>
void Graph<T>::backward(Var root) {
    if (value(root).size() != 1) {
        throw ShapeError("backward: root " + shape_str(value(root).shape()) +
                         " is not a scalar; pass an upstream gradient");
    }
    backward(root, Tensor<T>(value(root).shape(), T(1)));
}

template <typename T>
void Graph<T>::backward(Var root, const Tensor<T>& upstream) {
    if (upstream.shape() != value(root).shape()) {
        throw ShapeError("backward: upstream " + shape_str(upstream.shape()) + " does not match root " +
                         shape_str(value(root).shape()));
    }
    if (!node(root).requires_grad) return;
    Tensor<T>& seed = grad_buffer(root);
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] += upstream[i];
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        n.backward(*this, n);
    }
    for (Node& n : nodes_) {
        if (n.param == nullptr || n.grad.empty()) continue;
        auto& pg = n.param->grad;
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
}

template struct BceWeights<float>;
template struct BceWeights<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace labelaug
