#pragma once

#include <functional>
#include <vector>

#include "tricl/mat.hpp"

namespace tricl {

// Reverse-mode autodiff over dense matrices. Nodes are appended in forward
// order, which is a valid topological order, so backward() is a single reverse
// sweep. Gradients accumulate; seed the output grads before calling backward().
class Tape {
public:
    using Id = int;

    Id leaf(Mat value);

    Id matmul(Id a, Id b);      // A * B
    Id matmul_nt(Id a, Id b);   // A * B^T
    Id add(Id a, Id b);         // same shape
    Id add_row(Id a, Id row);   // broadcast a 1 x c row over every row of A
    Id scale(Id a, double s);
    Id gather_rows(Id table, std::vector<int> indices);
    Id vcat2(Id top, Id bottom);
    Id stack_rows(const std::vector<Id>& rows); // each 1 x c
    Id row(Id a, int r);                        // 1 x c slice
    Id col_slice(Id a, int c0, int c1);
    Id hcat(const std::vector<Id>& parts);
    Id layer_norm_rows(Id a, Id gain, Id bias, double eps);
    Id gelu(Id a);
    Id softmax_rows_masked(Id a, std::vector<uint8_t> key_valid);
    Id mean_rows_masked(Id a, const std::vector<uint8_t>& row_valid); // 1 x c
    Id l2_normalize_rows(Id a); // throws ValidationError on a zero-norm row

    const Mat& val(Id id) const { return nodes_[id].val; }
    Mat& grad(Id id);
    bool has_grad(Id id) const { return nodes_[id].has_grad; }
    void seed_grad(Id id, const Mat& g);

    void backward();
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool has_grad = false;
        std::function<void(Tape&)> back; // empty for leaves
    };

    Id push(Mat value, std::function<void(Tape&)> back);

    std::vector<Node> nodes_;
};

} // namespace tricl
