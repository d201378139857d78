#include "ict/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ict/errors.hpp"
#include "json.hpp"

namespace ict {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'T', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated checkpoint: " + path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("truncated checkpoint: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    const std::uint64_t bits = get_u64(in, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<std::uint32_t>(t.extent(i)));
    for (double v : t.values()) put_f64(out, v);
}

void read_tensor_into(std::istream& in, const std::string& path, Tensor& t) {
    const auto rank = static_cast<int>(get_u32(in, path));
    if (rank != t.rank()) throw IoError("checkpoint tensor rank mismatch: " + path);
    for (int i = 0; i < rank; ++i)
        if (static_cast<int>(get_u32(in, path)) != t.extent(i))
            throw IoError("checkpoint tensor shape mismatch: " + path);
    for (auto& v : t.values()) v = get_f64(in, path);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path,
                     const CheckpointState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    const ICTConfig& c = params.config;
    for (int v : {c.image_h, c.image_w, c.grid, c.channels, c.embed_dim, c.depth, c.heads,
                  c.mlp_ratio, c.n_identities})
        put_u32(out, static_cast<std::uint32_t>(v));
    const auto tensors = params.all();
    put_u64(out, tensors.size());
    for (const Tensor& t : tensors) write_tensor(out, t);
    if (!out) throw IoError("write failed: " + path);
    out.close();

    nlohmann::ordered_json side{{"epoch", state.epoch},
                                {"lr", state.lr},
                                {"margin", state.margin},
                                {"eta", state.eta},
                                {"seed", state.seed}};
    std::ofstream sj(path + ".json");
    if (!sj) throw IoError("cannot open for writing: " + path + ".json");
    sj << side.dump(2) << "\n";
}

ModelParams load_checkpoint(const std::string& path, CheckpointState* state) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a model checkpoint: " + path);
    if (get_u32(in, path) != kVersion) throw IoError("unsupported checkpoint version: " + path);

    ICTConfig c;
    c.image_h = static_cast<int>(get_u32(in, path));
    c.image_w = static_cast<int>(get_u32(in, path));
    c.grid = static_cast<int>(get_u32(in, path));
    c.channels = static_cast<int>(get_u32(in, path));
    c.embed_dim = static_cast<int>(get_u32(in, path));
    c.depth = static_cast<int>(get_u32(in, path));
    c.heads = static_cast<int>(get_u32(in, path));
    c.mlp_ratio = static_cast<int>(get_u32(in, path));
    c.n_identities = static_cast<int>(get_u32(in, path));

    ModelParams params = ModelParams::init(c, 0);
    auto tensors = params.all();
    if (get_u64(in, path) != tensors.size())
        throw IoError("checkpoint tensor count mismatch: " + path);
    for (Tensor& t : tensors) read_tensor_into(in, path, t);
    set_params_requires_grad(params, false);

    if (state) {
        std::ifstream sj(path + ".json");
        if (sj) {
            nlohmann::json j;
            sj >> j;
            state->epoch = j.value("epoch", 0);
            state->lr = j.value("lr", 0.0);
            state->margin = j.value("margin", 0.0);
            state->eta = j.value("eta", 0.0);
            state->seed = j.value("seed", 0ull);
        }
    }
    return params;
}

}  // namespace ict
