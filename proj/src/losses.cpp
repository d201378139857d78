#include "ict/losses.hpp"

#include <cmath>

#include "ict/errors.hpp"

namespace ict {

Tensor arcface_loss(Tape& tape, const Tensor& f, int label, const Tensor& head, double s,
                    double m) {
    if (head.rank() != 2)
        throw DimensionError("arcface_loss: head must be [D x n], got " +
                             Tensor::shape_str(head.shape()));
    const int d = head.extent(0), n = head.extent(1);
    if (f.rank() != 1 || f.extent(0) != d)
        throw DimensionError("arcface_loss: feature " + Tensor::shape_str(f.shape()) +
                             " does not match head " + Tensor::shape_str(head.shape()));
    if (label < 0 || label >= n)
        throw ContractError("arcface_loss: label " + std::to_string(label) +
                            " out of range [0," + std::to_string(n) + ")");
    Tensor fhat = tape.l2_normalize(f);  // throws DegenerateInputError on zero norm
    Tensor what = tape.l2_normalize_cols(head);
    Tensor cosines = tape.reshape(tape.matmul(tape.reshape(fhat, {1, d}), what), {n});
    Tensor logits = tape.angular_margin_logits(cosines, label, s, m);
    return tape.cross_entropy_logits(logits, label);
}

int predict_label(const std::vector<double>& f, const Tensor& head) {
    const int d = head.extent(0), n = head.extent(1);
    if (static_cast<int>(f.size()) != d)
        throw DimensionError("predict_label: feature size mismatch");
    double fn = 0.0;
    for (double v : f) fn += v * v;
    fn = std::sqrt(fn);
    if (fn < 1e-12) throw DegenerateInputError("predict_label: zero-norm feature");

    int best = 0;
    double best_cos = -2.0;
    for (int j = 0; j < n; ++j) {
        double dot = 0.0, wn = 0.0;
        for (int i = 0; i < d; ++i) {
            const double w = head.at(i, j);
            dot += w * f[static_cast<std::size_t>(i)];
            wn += w * w;
        }
        const double c = dot / (fn * std::sqrt(wn));
        if (c > best_cos) {
            best_cos = c;
            best = j;
        }
    }
    return best;
}

ConsistencyResult consistency_loss(Tape& tape, const IdentityPairT& sample,
                                   const IdentityPairT& mirror,
                                   const std::array<int, 4>& preds, int y_i, int y_j) {
    ConsistencyResult res;
    res.gate_in_open = preds[0] == y_i && preds[3] == y_i;
    res.gate_out_open = preds[1] == y_j && preds[2] == y_j;

    std::vector<Tensor> terms;
    if (res.gate_in_open) {
        Tensor d = tape.sub(tape.l2_normalize(sample.f_in), tape.l2_normalize(mirror.f_out));
        terms.push_back(tape.sum(tape.mul(d, d)));
    }
    if (res.gate_out_open) {
        Tensor d = tape.sub(tape.l2_normalize(sample.f_out), tape.l2_normalize(mirror.f_in));
        terms.push_back(tape.sum(tape.mul(d, d)));
    }
    if (terms.empty()) {
        res.loss = Tensor::scalar(0.0);  // constant: exactly zero loss and gradient
    } else if (terms.size() == 1) {
        res.loss = terms[0];
    } else {
        res.loss = tape.add(terms[0], terms[1]);
    }
    return res;
}

Tensor total_loss(Tape& tape, const std::vector<PairImages>& batch, const ModelParams& params,
                  double s, double m, double eta, LossBreakdown* breakdown) {
    if (batch.empty()) throw ContractError("total_loss: empty batch");
    const int pairs = static_cast<int>(batch.size());

    Tensor ident_sum;  // sum over images of (arc_in + arc_out) / 2
    Tensor consist_sum;
    int gates_open = 0;
    for (const PairImages& pair : batch) {
        if (pair.y_i == pair.y_j)
            throw ContractError("total_loss: pair labels must differ (unlinked pair?)");
        const ForwardResult fij = forward(tape, pair.image_ij, params);
        const ForwardResult fji = forward(tape, pair.image_ji, params);

        Tensor arc = tape.add(
            tape.add(arcface_loss(tape, fij.pair.f_in, pair.y_i, params.head, s, m),
                     arcface_loss(tape, fij.pair.f_out, pair.y_j, params.head, s, m)),
            tape.add(arcface_loss(tape, fji.pair.f_in, pair.y_j, params.head, s, m),
                     arcface_loss(tape, fji.pair.f_out, pair.y_i, params.head, s, m)));
        Tensor half = tape.scale(arc, 0.5);
        ident_sum = ident_sum.defined() ? tape.add(ident_sum, half) : half;

        const std::array<int, 4> preds{predict_label(fij.pair.f_in.values(), params.head),
                                       predict_label(fij.pair.f_out.values(), params.head),
                                       predict_label(fji.pair.f_in.values(), params.head),
                                       predict_label(fji.pair.f_out.values(), params.head)};
        const ConsistencyResult c =
            consistency_loss(tape, fij.pair, fji.pair, preds, pair.y_i, pair.y_j);
        gates_open += c.gate_in_open + c.gate_out_open;
        consist_sum = consist_sum.defined() ? tape.add(consist_sum, c.loss) : c.loss;
    }

    Tensor l_ident = tape.scale(ident_sum, 1.0 / (2.0 * pairs));
    Tensor l_consist = tape.scale(consist_sum, 1.0 / pairs);
    if (breakdown) {
        breakdown->ident = l_ident.value();
        breakdown->consist = l_consist.value();
        breakdown->gate_open_fraction = gates_open / (2.0 * pairs);
    }
    return tape.add(l_ident, tape.scale(l_consist, eta));
}

}  // namespace ict
