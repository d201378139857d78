#include "ict/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <thread>

#include "ict/checkpoint.hpp"
#include "ict/errors.hpp"
#include "ict/rng.hpp"
#include "ict/swap_forge.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace ict {

double TrainSchedule::lr_at(int epoch) const {
    double lr = lr0;
    for (int ms : lr_milestones)
        if (epoch > ms) lr /= 10.0;
    return lr;
}

double TrainSchedule::margin_at(int epoch) const {
    if (epoch <= 1) return 0.0;
    if (epoch >= m_ramp_end_epoch) return m_max;
    return m_max * (epoch - 1) / static_cast<double>(m_ramp_end_epoch - 1);
}

double TrainSchedule::eta_at(int epoch) const { return eta0 + eta_step * (epoch - 1); }

TrainSchedule TrainSchedule::desk() { return TrainSchedule{}; }

TrainSchedule TrainSchedule::paper() {
    TrainSchedule s;
    s.epochs = 30;
    s.batch_size = 1024;
    s.lr_milestones = {12, 15, 18};
    return s;
}

LoadedPairs load_training_pairs(const std::string& fake_root,
                                const std::string& fake_meta_path) {
    const auto rows = load_fake_meta(fake_meta_path);
    if (rows.empty()) throw ContractError("no fake samples in " + fake_meta_path);
    std::map<std::string, const FakeMetaRow*> by_path;
    for (const auto& r : rows) by_path[r.path] = &r;

    std::set<int> labels;
    for (const auto& r : rows) {
        labels.insert(r.inner_identity);
        labels.insert(r.outer_identity);
    }
    std::vector<int> label_map(labels.begin(), labels.end());
    std::map<int, int> to_head;
    for (std::size_t i = 0; i < label_map.size(); ++i)
        to_head[label_map[i]] = static_cast<int>(i);

    LoadedPairs out;
    out.label_map = std::move(label_map);
    std::set<std::string> used;
    for (const auto& r : rows) {
        if (used.count(r.path)) continue;
        const auto partner_it = by_path.find(r.partner_path);
        if (partner_it == by_path.end())
            throw ContractError("unlinked pair: " + r.path + " names missing partner " +
                                r.partner_path);
        const FakeMetaRow& p = *partner_it->second;
        if (p.partner_path != r.path || p.inner_identity != r.outer_identity ||
            p.outer_identity != r.inner_identity || r.inner_identity == r.outer_identity)
            throw ContractError("unlinked pair: labels of " + r.path + " and " + p.path +
                                " are not mirrored");
        used.insert(r.path);
        used.insert(p.path);

        PairImages pair;
        pair.image_ij = read_ppm((fs::path(fake_root) / r.path).string());
        pair.image_ji = read_ppm((fs::path(fake_root) / p.path).string());
        pair.y_i = to_head.at(r.inner_identity);
        pair.y_j = to_head.at(r.outer_identity);
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

namespace {

struct PairOutcome {
    GradStore grads;
    double arc_sum = 0.0;   // sum of the 4 arcface terms
    double consist = 0.0;
    int gates_open = 0;
    double loss_value = 0.0;
};

// Forward + backward for one mirrored pair; contribution is
// arc_sum/(4P) + eta*consist/P so that summing over the batch reproduces the
// batch total loss exactly.
PairOutcome run_pair(const PairImages& pair, const ModelParams& params, double s, double m,
                     double eta, int pairs_in_batch) {
    Tape tape;
    const ForwardResult fij = forward(tape, pair.image_ij, params);
    const ForwardResult fji = forward(tape, pair.image_ji, params);

    Tensor arc = tape.add(
        tape.add(arcface_loss(tape, fij.pair.f_in, pair.y_i, params.head, s, m),
                 arcface_loss(tape, fij.pair.f_out, pair.y_j, params.head, s, m)),
        tape.add(arcface_loss(tape, fji.pair.f_in, pair.y_j, params.head, s, m),
                 arcface_loss(tape, fji.pair.f_out, pair.y_i, params.head, s, m)));

    const std::array<int, 4> preds{predict_label(fij.pair.f_in.values(), params.head),
                                   predict_label(fij.pair.f_out.values(), params.head),
                                   predict_label(fji.pair.f_in.values(), params.head),
                                   predict_label(fji.pair.f_out.values(), params.head)};
    const ConsistencyResult c =
        consistency_loss(tape, fij.pair, fji.pair, preds, pair.y_i, pair.y_j);

    Tensor contribution = tape.scale(arc, 1.0 / (4.0 * pairs_in_batch));
    if (c.loss.requires_grad())
        contribution = tape.add(contribution, tape.scale(c.loss, eta / pairs_in_batch));

    PairOutcome out;
    out.arc_sum = arc.value();
    out.consist = c.loss.value();
    out.gates_open = static_cast<int>(c.gate_in_open) + static_cast<int>(c.gate_out_open);
    out.loss_value = out.arc_sum / (4.0 * pairs_in_batch) + eta * out.consist / pairs_in_batch;
    tape.backward(contribution, out.grads);
    return out;
}

}  // namespace

TrainResult train(ICTConfig config, const TrainSchedule& schedule, const std::string& fake_root,
                  const std::string& fake_meta_path, std::uint64_t seed,
                  const TrainOptions& options) {
    LoadedPairs data = load_training_pairs(fake_root, fake_meta_path);
    const int n_labels = static_cast<int>(data.label_map.size());
    if (config.n_identities == 0) config.n_identities = n_labels;
    if (config.n_identities < n_labels)
        throw ContractError("train: head has " + std::to_string(config.n_identities) +
                            " identities but data has " + std::to_string(n_labels));
    if (schedule.batch_size < 2 || schedule.batch_size % 2 != 0)
        throw ContractError("train: batch_size must be even and >= 2");

    ModelParams params = ModelParams::init(config, seed);
    const std::vector<Tensor> plist = params.all();
    std::vector<std::vector<double>> velocity(plist.size());
    for (std::size_t i = 0; i < plist.size(); ++i)
        velocity[i].assign(plist[i].values().size(), 0.0);

    const int n_threads = options.n_threads > 0
                              ? options.n_threads
                              : std::max(1u, std::thread::hardware_concurrency());
    const int pairs_per_batch = schedule.batch_size / 2;

    std::ofstream metrics;
    if (!options.metrics_path.empty()) {
        metrics.open(options.metrics_path);
        if (!metrics) throw IoError("cannot open for writing: " + options.metrics_path);
    }
    if (!options.checkpoint_dir.empty()) {
        std::error_code ec;
        fs::create_directories(options.checkpoint_dir, ec);
        if (ec) throw IoError("cannot create " + options.checkpoint_dir + ": " + ec.message());
    }

    TrainResult result;
    std::vector<int> order(data.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
        const double lr = schedule.lr_at(epoch);
        const double m = schedule.margin_at(epoch);
        const double eta = options.use_consistency ? schedule.eta_at(epoch) : 0.0;

        Rng shuffle_rng(derive_seed(seed, static_cast<std::uint64_t>(epoch), 0x5e));
        shuffle_rng.shuffle(order);

        double epoch_ident = 0.0, epoch_consist = 0.0;
        int epoch_gates = 0, epoch_pairs = 0, step = 0;

        for (std::size_t start = 0; start < order.size(); start += pairs_per_batch, ++step) {
            const int pib = static_cast<int>(
                std::min<std::size_t>(pairs_per_batch, order.size() - start));

            // gradient wave: n_threads pairs in flight, merged in batch order
            std::vector<PairOutcome> outcomes(static_cast<std::size_t>(pib));
            for (int wave = 0; wave < pib; wave += n_threads) {
                const int in_wave = std::min(n_threads, pib - wave);
                std::vector<std::future<PairOutcome>> futures;
                futures.reserve(static_cast<std::size_t>(in_wave));
                for (int t = 0; t < in_wave; ++t) {
                    const PairImages& pair =
                        data.pairs[static_cast<std::size_t>(order[start + wave + t])];
                    futures.push_back(std::async(std::launch::async, run_pair, std::cref(pair),
                                                 std::cref(params), schedule.s, m, eta, pib));
                }
                for (int t = 0; t < in_wave; ++t)
                    outcomes[static_cast<std::size_t>(wave + t)] = futures[static_cast<std::size_t>(t)].get();
            }

            double batch_loss = 0.0;
            for (const auto& o : outcomes) {
                batch_loss += o.loss_value;
                epoch_ident += o.arc_sum / 4.0;
                epoch_consist += o.consist;
                epoch_gates += o.gates_open;
            }
            epoch_pairs += pib;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));

            // merge and step
            for (std::size_t pi = 0; pi < plist.size(); ++pi) {
                auto& vel = velocity[pi];
                const TensorImpl* key = plist[pi].impl();
                std::vector<double> grad(vel.size(), 0.0);
                for (const auto& o : outcomes) {
                    const auto it = o.grads.find(key);
                    if (it == o.grads.end()) continue;
                    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += it->second[k];
                }
                auto& values = plist[pi].values();
                for (std::size_t k = 0; k < grad.size(); ++k) {
                    vel[k] = schedule.momentum * vel[k] + grad[k];
                    values[k] -= lr * vel[k];
                }
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.margin = m;
        stats.eta = eta;
        stats.l_ident = epoch_ident / (2.0 * epoch_pairs);
        stats.l_consist = epoch_consist / epoch_pairs;
        stats.gate_open_fraction = epoch_gates / (2.0 * epoch_pairs);
        result.log.push_back(stats);

        if (options.verbose)
            std::fprintf(stderr,
                         "epoch %2d lr %.6f m %.3f eta %.1f ident %.4f consist %.4f gates %.2f\n",
                         epoch, lr, m, eta, stats.l_ident, stats.l_consist,
                         stats.gate_open_fraction);

        if (metrics.is_open()) {
            nlohmann::ordered_json row{{"epoch", stats.epoch},
                                       {"lr", stats.lr},
                                       {"margin", stats.margin},
                                       {"eta", stats.eta},
                                       {"l_ident", stats.l_ident},
                                       {"l_consist", stats.l_consist},
                                       {"gate_open_fraction", stats.gate_open_fraction}};
            metrics << row.dump() << "\n";
            metrics.flush();
        }
        if (!options.checkpoint_dir.empty()) {
            CheckpointState st{epoch, lr, m, eta, seed};
            save_checkpoint(params,
                            (fs::path(options.checkpoint_dir) /
                             ("epoch_" + std::to_string(epoch) + ".ckpt"))
                                .string(),
                            st);
        }
    }

    if (!options.checkpoint_dir.empty()) {
        CheckpointState st{schedule.epochs, schedule.lr_at(schedule.epochs),
                           schedule.margin_at(schedule.epochs),
                           options.use_consistency ? schedule.eta_at(schedule.epochs) : 0.0,
                           seed};
        save_checkpoint(params, (fs::path(options.checkpoint_dir) / "final.ckpt").string(), st);
    }

    result.params = std::move(params);
    result.label_map = std::move(data.label_map);
    return result;
}

}  // namespace ict
