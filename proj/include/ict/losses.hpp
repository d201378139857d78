#pragma once

#include <array>
#include <vector>

#include "ict/image.hpp"
#include "ict/model.hpp"
#include "ict/tensor.hpp"

namespace ict {

// Cosine softmax with additive angular margin on the target class:
// loss = CE(s * cos(theta + m * 1{j==label}), label) over renormalized f and
// head columns.
Tensor arcface_loss(Tape& tape, const Tensor& f, int label, const Tensor& head, double s,
                    double m);

// Margin-free argmax over cosine logits; detached from differentiation.
int predict_label(const std::vector<double>& f, const Tensor& head);

struct ConsistencyResult {
    Tensor loss;        // scalar; a plain constant 0 when both gates are closed
    bool gate_in_open;  // inner(I_ij) <-> outer(I_ji) term active
    bool gate_out_open; // outer(I_ij) <-> inner(I_ji) term active
};

// Squared distances between L2-normalized identity vectors across a mirrored
// swap pair, each term gated on both of its predictions being correct.
// preds = {pred(f_ij_in), pred(f_ij_out), pred(f_ji_in), pred(f_ji_out)}.
ConsistencyResult consistency_loss(Tape& tape, const IdentityPairT& sample,
                                   const IdentityPairT& mirror,
                                   const std::array<int, 4>& preds, int y_i, int y_j);

// One mirrored training unit: I_ij with its partner I_ji. Labels are already
// remapped into head space.
struct PairImages {
    Image8 image_ij;
    Image8 image_ji;
    int y_i = 0;
    int y_j = 0;
};

struct LossBreakdown {
    double ident = 0.0;
    double consist = 0.0;
    double gate_open_fraction = 0.0;
};

// L = L_ident + eta * L_consist with L_ident the mean over images of
// (arcface(f_in, y_i) + arcface(f_out, y_j)) / 2 and L_consist the mean over
// pairs of the gated consistency loss.
Tensor total_loss(Tape& tape, const std::vector<PairImages>& batch, const ModelParams& params,
                  double s, double m, double eta, LossBreakdown* breakdown = nullptr);

}  // namespace ict
