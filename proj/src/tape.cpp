#include "tricl/tape.hpp"

#include <cassert>
#include <cmath>

#include "tricl/error.hpp"

namespace tricl {

Tape::Id Tape::push(Mat value, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), false, std::move(back)});
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Mat value) { return push(std::move(value), nullptr); }

Mat& Tape::grad(Id id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Mat(n.val.rows, n.val.cols);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::seed_grad(Id id, const Mat& g) {
    assert(g.same_shape(nodes_[id].val));
    Mat& dst = grad(id);
    for (size_t i = 0; i < g.size(); ++i) dst.a[i] += g.a[i];
}

void Tape::backward() {
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.has_grad && n.back) n.back(*this);
    }
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    assert(A.cols == B.rows);
    Mat out = matmul_nn(A, B);
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        matmul_nt_acc(g, t.val(b), t.grad(a)); // dA += g * B^T
        matmul_tn_acc(t.val(a), g, t.grad(b)); // dB += A^T * g
    };
    return id;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    assert(A.cols == B.cols);
    Mat out = tricl::matmul_nt(A, B);
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        matmul_nn_acc(g, t.val(b), t.grad(a)); // dA += g * B
        matmul_tn_acc(g, t.val(a), t.grad(b)); // dB += g^T * A
    };
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    assert(A.same_shape(B));
    Mat out = A;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] += B.a[i];
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, b](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        Mat& gb = t.grad(b);
        for (size_t i = 0; i < g.size(); ++i) {
            ga.a[i] += g.a[i];
            gb.a[i] += g.a[i];
        }
    };
    return id;
}

Tape::Id Tape::add_row(Id a, Id rowv) {
    const Mat& A = val(a);
    const Mat& R = val(rowv);
    assert(R.rows == 1 && R.cols == A.cols);
    Mat out = A;
    for (int r = 0; r < out.rows; ++r) {
        double* orow = out.row_ptr(r);
        for (int c = 0; c < out.cols; ++c) orow[c] += R.a[c];
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, rowv](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        Mat& gr = t.grad(rowv);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i];
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row_ptr(r);
            for (int c = 0; c < g.cols; ++c) gr.a[c] += grow[c];
        }
    };
    return id;
}

Tape::Id Tape::scale(Id a, double s) {
    Mat out = val(a);
    for (double& x : out.a) x *= s;
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, s](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += s * g.a[i];
    };
    return id;
}

Tape::Id Tape::gather_rows(Id table, std::vector<int> indices) {
    const Mat& T = val(table);
    Mat out(static_cast<int>(indices.size()), T.cols);
    for (size_t r = 0; r < indices.size(); ++r) {
        assert(indices[r] >= 0 && indices[r] < T.rows);
        const double* src = T.row_ptr(indices[r]);
        double* dst = out.row_ptr(static_cast<int>(r));
        for (int c = 0; c < T.cols; ++c) dst[c] = src[c];
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, table, idx = std::move(indices)](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& gt = t.grad(table);
        for (size_t r = 0; r < idx.size(); ++r) {
            const double* grow = g.row_ptr(static_cast<int>(r));
            double* drow = gt.row_ptr(idx[r]);
            for (int c = 0; c < g.cols; ++c) drow[c] += grow[c];
        }
    };
    return id;
}

Tape::Id Tape::vcat2(Id top, Id bottom) {
    const Mat& A = val(top);
    const Mat& B = val(bottom);
    assert(A.cols == B.cols);
    Mat out(A.rows + B.rows, A.cols);
    std::copy(A.a.begin(), A.a.end(), out.a.begin());
    std::copy(B.a.begin(), B.a.end(), out.a.begin() + A.size());
    Id id = push(std::move(out), nullptr);
    const int split = A.rows;
    nodes_[id].back = [id, top, bottom, split](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(top);
        Mat& gb = t.grad(bottom);
        const size_t na = ga.size();
        (void)split;
        for (size_t i = 0; i < na; ++i) ga.a[i] += g.a[i];
        for (size_t i = 0; i < gb.size(); ++i) gb.a[i] += g.a[na + i];
    };
    return id;
}

Tape::Id Tape::stack_rows(const std::vector<Id>& rows) {
    assert(!rows.empty());
    const int cols = val(rows[0]).cols;
    Mat out(static_cast<int>(rows.size()), cols);
    for (size_t r = 0; r < rows.size(); ++r) {
        const Mat& R = val(rows[r]);
        assert(R.rows == 1 && R.cols == cols);
        std::copy(R.a.begin(), R.a.end(), out.row_ptr(static_cast<int>(r)));
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, parts = rows](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        for (size_t r = 0; r < parts.size(); ++r) {
            Mat& gp = t.grad(parts[r]);
            const double* grow = g.row_ptr(static_cast<int>(r));
            for (int c = 0; c < g.cols; ++c) gp.a[c] += grow[c];
        }
    };
    return id;
}

Tape::Id Tape::row(Id a, int r) {
    const Mat& A = val(a);
    assert(r >= 0 && r < A.rows);
    Mat out(1, A.cols);
    std::copy(A.row_ptr(r), A.row_ptr(r) + A.cols, out.a.begin());
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, r](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        double* drow = ga.row_ptr(r);
        for (int c = 0; c < g.cols; ++c) drow[c] += g.a[c];
    };
    return id;
}

Tape::Id Tape::col_slice(Id a, int c0, int c1) {
    const Mat& A = val(a);
    assert(0 <= c0 && c0 < c1 && c1 <= A.cols);
    Mat out(A.rows, c1 - c0);
    for (int r = 0; r < A.rows; ++r)
        std::copy(A.row_ptr(r) + c0, A.row_ptr(r) + c1, out.row_ptr(r));
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, c0](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        for (int r = 0; r < g.rows; ++r) {
            const double* grow = g.row_ptr(r);
            double* drow = ga.row_ptr(r) + c0;
            for (int c = 0; c < g.cols; ++c) drow[c] += grow[c];
        }
    };
    return id;
}

Tape::Id Tape::hcat(const std::vector<Id>& parts) {
    assert(!parts.empty());
    const int rows = val(parts[0]).rows;
    int cols = 0;
    for (Id p : parts) {
        assert(val(p).rows == rows);
        cols += val(p).cols;
    }
    Mat out(rows, cols);
    int off = 0;
    for (Id p : parts) {
        const Mat& P = val(p);
        for (int r = 0; r < rows; ++r)
            std::copy(P.row_ptr(r), P.row_ptr(r) + P.cols, out.row_ptr(r) + off);
        off += P.cols;
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, ps = parts](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        int off2 = 0;
        for (Id p : ps) {
            Mat& gp = t.grad(p);
            for (int r = 0; r < g.rows; ++r) {
                const double* grow = g.row_ptr(r) + off2;
                double* drow = gp.row_ptr(r);
                for (int c = 0; c < gp.cols; ++c) drow[c] += grow[c];
            }
            off2 += gp.cols;
        }
    };
    return id;
}

Tape::Id Tape::layer_norm_rows(Id a, Id gain, Id bias, double eps) {
    const Mat& A = val(a);
    const Mat& G = val(gain);
    const Mat& B = val(bias);
    assert(G.rows == 1 && G.cols == A.cols && B.rows == 1 && B.cols == A.cols);
    Mat out(A.rows, A.cols);
    std::vector<double> inv_sigma(A.rows), mu(A.rows);
    const int n = A.cols;
    for (int r = 0; r < A.rows; ++r) {
        const double* x = A.row_ptr(r);
        double m = 0.0;
        for (int c = 0; c < n; ++c) m += x[c];
        m /= n;
        double v = 0.0;
        for (int c = 0; c < n; ++c) v += (x[c] - m) * (x[c] - m);
        v /= n;
        const double is = 1.0 / std::sqrt(v + eps);
        mu[r] = m;
        inv_sigma[r] = is;
        double* y = out.row_ptr(r);
        for (int c = 0; c < n; ++c) y[c] = G.a[c] * (x[c] - m) * is + B.a[c];
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, gain, bias, mu = std::move(mu),
                       inv_sigma = std::move(inv_sigma)](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        const Mat& A2 = t.val(a);
        const Mat& G2 = t.val(gain);
        Mat& ga = t.grad(a);
        Mat& gg = t.grad(gain);
        Mat& gb = t.grad(bias);
        const int n2 = A2.cols;
        std::vector<double> xhat(n2), dxhat(n2);
        for (int r = 0; r < A2.rows; ++r) {
            const double* x = A2.row_ptr(r);
            const double* grow = g.row_ptr(r);
            const double is = inv_sigma[r];
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (int c = 0; c < n2; ++c) {
                xhat[c] = (x[c] - mu[r]) * is;
                dxhat[c] = grow[c] * G2.a[c];
                gg.a[c] += grow[c] * xhat[c];
                gb.a[c] += grow[c];
                mean_dxhat += dxhat[c];
                mean_dxhat_xhat += dxhat[c] * xhat[c];
            }
            mean_dxhat /= n2;
            mean_dxhat_xhat /= n2;
            double* drow = ga.row_ptr(r);
            for (int c = 0; c < n2; ++c)
                drow[c] += (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat) * is;
        }
    };
    return id;
}

Tape::Id Tape::gelu(Id a) {
    const Mat& A = val(a);
    Mat out(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) {
        const double x = A.a[i];
        out.a[i] = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        const Mat& A2 = t.val(a);
        Mat& ga = t.grad(a);
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (size_t i = 0; i < g.size(); ++i) {
            const double x = A2.a[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            ga.a[i] += g.a[i] * (cdf + x * pdf);
        }
    };
    return id;
}

Tape::Id Tape::softmax_rows_masked(Id a, std::vector<uint8_t> key_valid) {
    const Mat& A = val(a);
    assert(static_cast<int>(key_valid.size()) == A.cols);
    Mat out(A.rows, A.cols);
    for (int r = 0; r < A.rows; ++r) {
        const double* x = A.row_ptr(r);
        double m = -HUGE_VAL;
        for (int c = 0; c < A.cols; ++c)
            if (key_valid[c] && x[c] > m) m = x[c];
        double z = 0.0;
        double* y = out.row_ptr(r);
        for (int c = 0; c < A.cols; ++c) {
            y[c] = key_valid[c] ? std::exp(x[c] - m) : 0.0;
            z += y[c];
        }
        for (int c = 0; c < A.cols; ++c) y[c] /= z;
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, valid = std::move(key_valid)](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        const Mat& P = t.val(id);
        Mat& ga = t.grad(a);
        for (int r = 0; r < g.rows; ++r) {
            const double* p = P.row_ptr(r);
            const double* grow = g.row_ptr(r);
            double s = 0.0;
            for (int c = 0; c < g.cols; ++c) s += p[c] * grow[c];
            double* drow = ga.row_ptr(r);
            for (int c = 0; c < g.cols; ++c)
                if (valid[c]) drow[c] += p[c] * (grow[c] - s);
        }
    };
    return id;
}

Tape::Id Tape::mean_rows_masked(Id a, const std::vector<uint8_t>& row_valid) {
    const Mat& A = val(a);
    assert(static_cast<int>(row_valid.size()) == A.rows);
    int count = 0;
    for (uint8_t v : row_valid) count += v ? 1 : 0;
    if (count == 0) throw ValidationError("mean_rows_masked: no valid rows");
    Mat out(1, A.cols);
    for (int r = 0; r < A.rows; ++r) {
        if (!row_valid[r]) continue;
        const double* x = A.row_ptr(r);
        for (int c = 0; c < A.cols; ++c) out.a[c] += x[c];
    }
    for (double& x : out.a) x /= count;
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, valid = row_valid, count](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        Mat& ga = t.grad(a);
        for (int r = 0; r < ga.rows; ++r) {
            if (!valid[r]) continue;
            double* drow = ga.row_ptr(r);
            for (int c = 0; c < g.cols; ++c) drow[c] += g.a[c] / count;
        }
    };
    return id;
}

Tape::Id Tape::l2_normalize_rows(Id a) {
    const Mat& A = val(a);
    Mat out(A.rows, A.cols);
    std::vector<double> norms(A.rows);
    for (int r = 0; r < A.rows; ++r) {
        const double* x = A.row_ptr(r);
        double s = 0.0;
        for (int c = 0; c < A.cols; ++c) s += x[c] * x[c];
        const double nrm = std::sqrt(s);
        if (!(nrm > 0.0) || !std::isfinite(nrm))
            throw ValidationError("degenerate embedding: zero-norm projection output");
        norms[r] = nrm;
        double* y = out.row_ptr(r);
        for (int c = 0; c < A.cols; ++c) y[c] = x[c] / nrm;
    }
    Id id = push(std::move(out), nullptr);
    nodes_[id].back = [id, a, norms = std::move(norms)](Tape& t) {
        const Mat& g = t.nodes_[id].grad;
        const Mat& Y = t.val(id);
        Mat& ga = t.grad(a);
        for (int r = 0; r < g.rows; ++r) {
            const double* y = Y.row_ptr(r);
            const double* grow = g.row_ptr(r);
            double yg = 0.0;
            for (int c = 0; c < g.cols; ++c) yg += y[c] * grow[c];
            double* drow = ga.row_ptr(r);
            for (int c = 0; c < g.cols; ++c) drow[c] += (grow[c] - y[c] * yg) / norms[r];
        }
    };
    return id;
}

} // namespace tricl
