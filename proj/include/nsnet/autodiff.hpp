#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace nsnet {

// Reverse-mode tape over 2-D row-major double tensors. Graphs are built per
// forward pass as shared_ptr DAGs and freed when the loss goes out of scope;
// parameter leaves live in a ParamStore and keep their grad buffers across
// graphs so one backward per optimizer step accumulates into them.
struct Tensor {
    size_t rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<double> grad;    // allocated iff needs_grad
    bool requires_grad = false;  // trainable leaf
    bool needs_grad = false;     // on a path to a trainable leaf
    const char* op = "leaf";
    std::vector<std::shared_ptr<Tensor>> parents;
    std::function<void()> backprop;

    size_t numel() const { return rows * cols; }
    double& at(size_t r, size_t c) { return value[r * cols + c]; }
    double at(size_t r, size_t c) const { return value[r * cols + c]; }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline void check_finite(const Tensor& t) {
    for (double v : t.value) {
        if (!std::isfinite(v)) {
            fail_contract(std::string("non-finite value produced by op '") + t.op + "'");
        }
    }
}

inline void check_grad_finite(const Tensor& t) {
    for (double g : t.grad) {
        if (!std::isfinite(g)) {
            fail_contract(std::string("non-finite gradient at op '") + t.op + "'");
        }
    }
}

inline TensorPtr make_leaf(size_t rows, size_t cols, bool requires_grad = false) {
    auto t = std::make_shared<Tensor>();
    t->rows = rows;
    t->cols = cols;
    t->value.assign(rows * cols, 0.0);
    t->requires_grad = requires_grad;
    t->needs_grad = requires_grad;
    if (t->needs_grad) t->grad.assign(rows * cols, 0.0);
    return t;
}

inline TensorPtr constant(size_t rows, size_t cols, double fill = 0.0) {
    auto t = make_leaf(rows, cols, false);
    std::fill(t->value.begin(), t->value.end(), fill);
    return t;
}

inline TensorPtr row_constant(const std::vector<double>& values) {
    auto t = make_leaf(1, values.size(), false);
    t->value = values;
    return t;
}

namespace detail {

inline TensorPtr make_op(const char* name, size_t rows, size_t cols,
                         std::vector<TensorPtr> parents) {
    auto t = std::make_shared<Tensor>();
    t->rows = rows;
    t->cols = cols;
    t->value.assign(rows * cols, 0.0);
    t->op = name;
    t->parents = std::move(parents);
    for (const auto& p : t->parents) {
        if (p->needs_grad) t->needs_grad = true;
    }
    if (t->needs_grad) t->grad.assign(rows * cols, 0.0);
    return t;
}

// C(m x n) += A(m x k) * B(k x n)
inline void mm_nn(const double* A, const double* B, double* C, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (size_t p = 0; p < k; ++p) {
            double av = a[p];
            const double* b = B + p * n;
            for (size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C(m x k) += A(m x n) * B(k x n)^T
inline void mm_nt(const double* A, const double* B, double* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i) {
        const double* a = A + i * n;
        double* c = C + i * k;
        for (size_t p = 0; p < k; ++p) {
            const double* b = B + p * n;
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += a[j] * b[j];
            c[p] += acc;
        }
    }
}

// C(k x n) += A(m x k)^T * B(m x n)
inline void mm_tn(const double* A, const double* B, double* C, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        const double* b = B + i * n;
        for (size_t p = 0; p < k; ++p) {
            double av = a[p];
            double* c = C + p * n;
            for (size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace detail

inline TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->rows) {
        fail_contract("matmul: shape mismatch (" + std::to_string(a->rows) + "x" +
                      std::to_string(a->cols) + ") * (" + std::to_string(b->rows) + "x" +
                      std::to_string(b->cols) + ")");
    }
    auto out = detail::make_op("matmul", a->rows, b->cols, {a, b});
    detail::mm_nn(a->value.data(), b->value.data(), out->value.data(), a->rows, a->cols, b->cols);
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        Tensor* tb = b.get();
        out->backprop = [o, ta, tb] {
            // dA += G * B^T, dB += A^T * G
            if (ta->needs_grad) {
                detail::mm_nt(o->grad.data(), tb->value.data(), ta->grad.data(), o->rows, o->cols,
                              ta->cols);
            }
            if (tb->needs_grad) {
                detail::mm_tn(ta->value.data(), o->grad.data(), tb->grad.data(), ta->rows,
                              ta->cols, o->cols);
            }
        };
    }
    return out;
}

// Same-shape add, or bias add when b is a single row broadcast over a's rows.
inline TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    bool broadcast = (b->rows == 1 && a->cols == b->cols && a->rows != b->rows);
    if (!broadcast && (a->rows != b->rows || a->cols != b->cols)) {
        fail_contract("add: shape mismatch (" + std::to_string(a->rows) + "x" +
                      std::to_string(a->cols) + ") + (" + std::to_string(b->rows) + "x" +
                      std::to_string(b->cols) + ")");
    }
    auto out = detail::make_op("add", a->rows, a->cols, {a, b});
    for (size_t i = 0; i < a->rows; ++i) {
        const double* bv = b->value.data() + (broadcast ? 0 : i * b->cols);
        const double* av = a->value.data() + i * a->cols;
        double* ov = out->value.data() + i * a->cols;
        for (size_t j = 0; j < a->cols; ++j) ov[j] = av[j] + bv[j];
    }
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        Tensor* tb = b.get();
        out->backprop = [o, ta, tb, broadcast] {
            if (ta->needs_grad) {
                for (size_t i = 0; i < o->grad.size(); ++i) ta->grad[i] += o->grad[i];
            }
            if (tb->needs_grad) {
                if (broadcast) {
                    for (size_t i = 0; i < o->rows; ++i) {
                        for (size_t j = 0; j < o->cols; ++j) {
                            tb->grad[j] += o->grad[i * o->cols + j];
                        }
                    }
                } else {
                    for (size_t i = 0; i < o->grad.size(); ++i) tb->grad[i] += o->grad[i];
                }
            }
        };
    }
    return out;
}

inline TensorPtr scale(const TensorPtr& a, double c) {
    auto out = detail::make_op("scale", a->rows, a->cols, {a});
    for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] * c;
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta, c] {
            for (size_t i = 0; i < o->grad.size(); ++i) ta->grad[i] += o->grad[i] * c;
        };
    }
    return out;
}

inline TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) fail_contract("concat_cols: no inputs");
    size_t rows = parts[0]->rows;
    size_t cols = 0;
    for (const auto& p : parts) {
        if (p->rows != rows) fail_contract("concat_cols: row mismatch");
        cols += p->cols;
    }
    auto out = detail::make_op("concat_cols", rows, cols, parts);
    size_t off = 0;
    for (const auto& p : parts) {
        for (size_t i = 0; i < rows; ++i) {
            std::memcpy(out->value.data() + i * cols + off, p->value.data() + i * p->cols,
                        p->cols * sizeof(double));
        }
        off += p->cols;
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        std::vector<Tensor*> raw;
        for (const auto& p : parts) raw.push_back(p.get());
        out->backprop = [o, raw] {
            size_t off2 = 0;
            for (Tensor* p : raw) {
                if (p->needs_grad) {
                    for (size_t i = 0; i < p->rows; ++i) {
                        for (size_t j = 0; j < p->cols; ++j) {
                            p->grad[i * p->cols + j] += o->grad[i * o->cols + off2 + j];
                        }
                    }
                }
                off2 += p->cols;
            }
        };
    }
    return out;
}

inline TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) fail_contract("concat_rows: no inputs");
    size_t cols = parts[0]->cols;
    size_t rows = 0;
    for (const auto& p : parts) {
        if (p->cols != cols) fail_contract("concat_rows: column mismatch");
        rows += p->rows;
    }
    auto out = detail::make_op("concat_rows", rows, cols, parts);
    size_t off = 0;
    for (const auto& p : parts) {
        std::memcpy(out->value.data() + off * cols, p->value.data(),
                    p->numel() * sizeof(double));
        off += p->rows;
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        std::vector<Tensor*> raw;
        for (const auto& p : parts) raw.push_back(p.get());
        out->backprop = [o, raw] {
            size_t off2 = 0;
            for (Tensor* p : raw) {
                if (p->needs_grad) {
                    for (size_t i = 0; i < p->numel(); ++i) {
                        p->grad[i] += o->grad[off2 * o->cols + i];
                    }
                }
                off2 += p->rows;
            }
        };
    }
    return out;
}

inline TensorPtr slice_cols(const TensorPtr& a, size_t start, size_t len) {
    if (start + len > a->cols) fail_contract("slice_cols: range out of bounds");
    auto out = detail::make_op("slice_cols", a->rows, len, {a});
    for (size_t i = 0; i < a->rows; ++i) {
        std::memcpy(out->value.data() + i * len, a->value.data() + i * a->cols + start,
                    len * sizeof(double));
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta, start, len] {
            for (size_t i = 0; i < o->rows; ++i) {
                for (size_t j = 0; j < len; ++j) {
                    ta->grad[i * ta->cols + start + j] += o->grad[i * len + j];
                }
            }
        };
    }
    return out;
}

inline TensorPtr transpose(const TensorPtr& a) {
    auto out = detail::make_op("transpose", a->cols, a->rows, {a});
    for (size_t i = 0; i < a->rows; ++i) {
        for (size_t j = 0; j < a->cols; ++j) out->value[j * a->rows + i] = a->value[i * a->cols + j];
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta] {
            for (size_t i = 0; i < o->rows; ++i) {
                for (size_t j = 0; j < o->cols; ++j) {
                    ta->grad[j * ta->cols + i] += o->grad[i * o->cols + j];
                }
            }
        };
    }
    return out;
}

namespace detail {

template <typename F, typename DF>
inline TensorPtr elementwise(const char* name, const TensorPtr& a, F f, DF df) {
    auto out = make_op(name, a->rows, a->cols, {a});
    for (size_t i = 0; i < a->value.size(); ++i) out->value[i] = f(a->value[i]);
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta, df] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                ta->grad[i] += o->grad[i] * df(ta->value[i], o->value[i]);
            }
        };
    }
    return out;
}

}  // namespace detail

inline TensorPtr relu(const TensorPtr& a) {
    return detail::elementwise(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline TensorPtr tanh(const TensorPtr& a) {
    return detail::elementwise(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

inline TensorPtr sigmoid(const TensorPtr& a) {
    return detail::elementwise(
        "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline TensorPtr row_softmax(const TensorPtr& a) {
    if (a->cols == 0) fail_contract("row_softmax: empty rows");
    auto out = detail::make_op("row_softmax", a->rows, a->cols, {a});
    for (size_t i = 0; i < a->rows; ++i) {
        const double* x = a->value.data() + i * a->cols;
        double* y = out->value.data() + i * a->cols;
        double mx = x[0];
        for (size_t j = 1; j < a->cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (size_t j = 0; j < a->cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (size_t j = 0; j < a->cols; ++j) y[j] /= sum;
    }
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta] {
            // dx_j = y_j * (g_j - sum_k g_k y_k), per row
            for (size_t i = 0; i < o->rows; ++i) {
                const double* y = o->value.data() + i * o->cols;
                const double* g = o->grad.data() + i * o->cols;
                double dot = 0.0;
                for (size_t j = 0; j < o->cols; ++j) dot += g[j] * y[j];
                double* dx = ta->grad.data() + i * o->cols;
                for (size_t j = 0; j < o->cols; ++j) dx[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return out;
}

inline TensorPtr sum_rows(const TensorPtr& a) {
    auto out = detail::make_op("sum_rows", 1, a->cols, {a});
    for (size_t i = 0; i < a->rows; ++i) {
        for (size_t j = 0; j < a->cols; ++j) out->value[j] += a->value[i * a->cols + j];
    }
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta] {
            for (size_t i = 0; i < ta->rows; ++i) {
                for (size_t j = 0; j < ta->cols; ++j) ta->grad[i * ta->cols + j] += o->grad[j];
            }
        };
    }
    return out;
}

inline TensorPtr mean_rows(const TensorPtr& a) {
    if (a->rows == 0) fail_contract("mean_rows: no rows");
    return scale(sum_rows(a), 1.0 / static_cast<double>(a->rows));
}

// Inverted scaling: survivors divided by keep probability at train time, so
// eval (train=false or rate 0) is the identity and returns the input node.
inline TensorPtr dropout(const TensorPtr& a, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) fail_contract("dropout: rate must be in [0, 1)");
    if (!train || rate == 0.0) return a;
    auto out = detail::make_op("dropout", a->rows, a->cols, {a});
    auto mask = std::make_shared<std::vector<double>>(a->numel(), 0.0);
    double keep = 1.0 - rate;
    for (size_t i = 0; i < a->numel(); ++i) {
        if (rng.uniform() >= rate) (*mask)[i] = 1.0 / keep;
        out->value[i] = a->value[i] * (*mask)[i];
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* ta = a.get();
        out->backprop = [o, ta, mask] {
            for (size_t i = 0; i < o->grad.size(); ++i) ta->grad[i] += o->grad[i] * (*mask)[i];
        };
    }
    return out;
}

// Gather rows of table by id; repeated ids accumulate gradient into the same
// row. This is the embedding lookup.
inline TensorPtr gather_rows(const TensorPtr& table, const std::vector<size_t>& ids) {
    if (ids.empty()) fail_contract("gather_rows: empty id list");
    for (size_t id : ids) {
        if (id >= table->rows) fail_contract("gather_rows: id out of range");
    }
    auto out = detail::make_op("gather_rows", ids.size(), table->cols, {table});
    for (size_t i = 0; i < ids.size(); ++i) {
        std::memcpy(out->value.data() + i * table->cols, table->value.data() + ids[i] * table->cols,
                    table->cols * sizeof(double));
    }
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* tt = table.get();
        auto idv = std::make_shared<std::vector<size_t>>(ids);
        out->backprop = [o, tt, idv] {
            for (size_t i = 0; i < idv->size(); ++i) {
                double* dst = tt->grad.data() + (*idv)[i] * tt->cols;
                const double* src = o->grad.data() + i * o->cols;
                for (size_t j = 0; j < o->cols; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

// Softmax cross-entropy over a single logit row: loss = logsumexp(x) - x[label].
inline TensorPtr cross_entropy(const TensorPtr& logits, size_t label) {
    if (logits->rows != 1) fail_contract("cross_entropy: logits must be a single row");
    if (label >= logits->cols) fail_contract("cross_entropy: label out of range");
    auto out = detail::make_op("cross_entropy", 1, 1, {logits});
    double mx = logits->value[0];
    for (size_t j = 1; j < logits->cols; ++j) mx = std::max(mx, logits->value[j]);
    double sum = 0.0;
    for (size_t j = 0; j < logits->cols; ++j) sum += std::exp(logits->value[j] - mx);
    double lse = mx + std::log(sum);
    out->value[0] = lse - logits->value[label];
    check_finite(*out);
    if (out->needs_grad) {
        Tensor* o = out.get();
        Tensor* tl = logits.get();
        out->backprop = [o, tl, label, lse] {
            double g = o->grad[0];
            for (size_t j = 0; j < tl->cols; ++j) {
                double p = std::exp(tl->value[j] - lse);
                tl->grad[j] += g * (p - (j == label ? 1.0 : 0.0));
            }
        };
    }
    return out;
}

// Reverse topological sweep from a scalar loss. Parameter grads accumulate;
// zero them via ParamStore::zero_grads before building the next step's graph.
inline void backward(const TensorPtr& loss) {
    if (loss->rows != 1 || loss->cols != 1) fail_contract("backward: loss must be 1x1");
    if (!loss->needs_grad) return;

    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor* node = *it;
        check_grad_finite(*node);
        if (node->backprop) node->backprop();
    }
}

enum class Init { zeros, xavier };

// Named trainable leaves. std::map keeps iteration order (and therefore the
// optimizer's arithmetic and the checkpoint layout) deterministic.
class ParamStore {
public:
    std::map<std::string, TensorPtr> params;
    uint64_t seed = 0;

    TensorPtr create(const std::string& name, size_t rows, size_t cols, Init init, Rng& rng) {
        if (params.count(name)) fail_contract("ParamStore: duplicate parameter " + name);
        auto t = make_leaf(rows, cols, true);
        if (init == Init::xavier) {
            // uniform in ±sqrt(6 / (fan_in + fan_out))
            double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
            for (auto& v : t->value) v = rng.uniform(-bound, bound);
        }
        params.emplace(name, t);
        return t;
    }

    // Registers a tensor created elsewhere (an embedding table, typically) so
    // it participates in zero_grads, optimizer steps and checkpoints.
    void adopt(const std::string& name, const TensorPtr& t) {
        if (params.count(name)) fail_contract("ParamStore: duplicate parameter " + name);
        params.emplace(name, t);
    }

    TensorPtr get(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end()) fail_lookup("ParamStore: missing parameter " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params.count(name) > 0; }

    void zero_grads() {
        for (auto& [name, t] : params) {
            (void)name;
            if (t->needs_grad) std::fill(t->grad.begin(), t->grad.end(), 0.0);
        }
    }

    ParamStore clone() const {
        ParamStore out;
        out.seed = seed;
        for (const auto& [name, t] : params) {
            auto c = make_leaf(t->rows, t->cols, t->requires_grad);
            c->value = t->value;
            out.params.emplace(name, c);
        }
        return out;
    }

    // Copies values for names present in both stores; missing names are an error.
    void load_values_from(const ParamStore& other, const std::string& prefix = "") {
        for (auto& [name, t] : params) {
            if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
            auto src = other.get(name);
            if (src->rows != t->rows || src->cols != t->cols) {
                fail_lookup("ParamStore: shape mismatch for " + name);
            }
            t->value = src->value;
        }
    }

    // Checkpoint container: magic, format-version, seed, then per parameter
    // its name, shape, trainable flag and row-major doubles. Round-trips
    // bit-exactly on the same platform.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) fail_config("ParamStore: cannot write " + path);
        const char magic[4] = {'N', 'S', 'C', 'K'};
        out.write(magic, 4);
        uint32_t version = 1;
        out.write(reinterpret_cast<const char*>(&version), sizeof(version));
        out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
        uint64_t count = params.size();
        out.write(reinterpret_cast<const char*>(&count), sizeof(count));
        for (const auto& [name, t] : params) {
            uint32_t nlen = static_cast<uint32_t>(name.size());
            out.write(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
            out.write(name.data(), nlen);
            uint32_t rows = static_cast<uint32_t>(t->rows);
            uint32_t cols = static_cast<uint32_t>(t->cols);
            uint8_t trainable = t->requires_grad ? 1 : 0;
            out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
            out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
            out.write(reinterpret_cast<const char*>(&trainable), sizeof(trainable));
            out.write(reinterpret_cast<const char*>(t->value.data()),
                      static_cast<std::streamsize>(t->value.size() * sizeof(double)));
        }
        if (!out) fail_config("ParamStore: write failed for " + path);
    }

    static ParamStore load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail_config("ParamStore: cannot read " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "NSCK", 4) != 0) {
            fail_ingest("ParamStore: bad magic in " + path);
        }
        uint32_t version = 0;
        in.read(reinterpret_cast<char*>(&version), sizeof(version));
        if (version != 1) fail_ingest("ParamStore: unsupported format-version in " + path);
        ParamStore store;
        in.read(reinterpret_cast<char*>(&store.seed), sizeof(store.seed));
        uint64_t count = 0;
        in.read(reinterpret_cast<char*>(&count), sizeof(count));
        for (uint64_t i = 0; i < count; ++i) {
            uint32_t nlen = 0;
            in.read(reinterpret_cast<char*>(&nlen), sizeof(nlen));
            std::string name(nlen, '\0');
            in.read(name.data(), nlen);
            uint32_t rows = 0, cols = 0;
            uint8_t trainable = 0;
            in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
            in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
            in.read(reinterpret_cast<char*>(&trainable), sizeof(trainable));
            auto t = make_leaf(rows, cols, trainable != 0);
            in.read(reinterpret_cast<char*>(t->value.data()),
                    static_cast<std::streamsize>(t->value.size() * sizeof(double)));
            if (!in) fail_ingest("ParamStore: truncated checkpoint " + path);
            store.params.emplace(name, t);
        }
        return store;
    }
};

// Adam with bias correction and global-norm gradient clipping. Moments persist
// across steps; parameters with requires_grad=false are skipped entirely.
class Adam {
public:
    double lr = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;

    size_t steps() const { return t_; }

    void step(ParamStore& store) {
        double sq = 0.0;
        for (const auto& [name, t] : store.params) {
            (void)name;
            if (!t->requires_grad) continue;
            for (double g : t->grad) sq += g * g;
        }
        double norm = std::sqrt(sq);
        double clip = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

        ++t_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (auto& [name, t] : store.params) {
            if (!t->requires_grad) continue;
            auto& st = state_[name];
            if (st.m.empty()) {
                st.m.assign(t->numel(), 0.0);
                st.v.assign(t->numel(), 0.0);
            }
            for (size_t i = 0; i < t->numel(); ++i) {
                double g = t->grad[i] * clip;
                st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g;
                st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g * g;
                double mhat = st.m[i] / bc1;
                double vhat = st.v[i] / bc2;
                t->value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    std::map<std::string, Moments> state_;
    size_t t_ = 0;
};

}  // namespace nsnet
