#include "bgsnetd/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bgsnetd/binary_io.hpp"

namespace bgsnetd::nn {

namespace {

void write_spec(BinaryWriter& w, const ModelSpec& s)
{
    w.u32(static_cast<std::uint32_t>(s.in_channels));
    w.u32(static_cast<std::uint32_t>(s.patch_size));
    for (int v : s.conv_widths) w.u32(static_cast<std::uint32_t>(v));
    for (int v : s.hidden) w.u32(static_cast<std::uint32_t>(v));
    w.u8(static_cast<std::uint8_t>(s.mlp_order));
    w.f64(s.bn_momentum);
    w.f64(s.bn_epsilon);
}

ModelSpec read_spec(BinaryReader& r)
{
    ModelSpec s;
    s.in_channels = static_cast<int>(r.u32());
    s.patch_size = static_cast<int>(r.u32());
    for (int& v : s.conv_widths) v = static_cast<int>(r.u32());
    for (int& v : s.hidden) v = static_cast<int>(r.u32());
    const std::uint8_t order = r.u8();
    if (order > 1) {
        throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint: bad MLP order flag");
    }
    s.mlp_order = static_cast<MlpOrder>(order);
    s.bn_momentum = r.f64();
    s.bn_epsilon = r.f64();
    return s;
}

template <typename T>
void write_values(BinaryWriter& w, const Tensor<T>& t)
{
    for (T v : t.data) {
        if constexpr (sizeof(T) == 4) {
            w.f32(v);
        } else {
            w.f64(v);
        }
    }
}

template <typename T>
void read_values(BinaryReader& r, Tensor<T>& t, Precision stored)
{
    for (T& v : t.data) {
        v = stored == Precision::Float32 ? static_cast<T>(r.f32()) : static_cast<T>(r.f64());
    }
}

void read_header(BinaryReader& r, const std::filesystem::path& path)
{
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "BGSN", 4) != 0) {
        throw ParseError(ParseErrorKind::BadMagic, "not a model checkpoint (bad magic): " + path.string());
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw ParseError(ParseErrorKind::BadVersion, "unsupported checkpoint version " + std::to_string(version) +
                                                         " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
}

}  // namespace

template <typename T>
void save_checkpoint(const Model<T>& model, const RmspropState<T>& state, const std::filesystem::path& path)
{
    const auto tensors = model.named_state();
    const auto params = model.parameters();
    if (!state.empty() && state.accumulators.size() != params.size()) {
        throw DataError("optimizer state does not match the model parameters");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    BinaryWriter w(out);
    w.bytes("BGSN", 4);
    w.u32(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(precision_of<T>()));
    write_spec(w, model.spec());
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u32(static_cast<std::uint32_t>(t->rank()));
        for (std::size_t e : t->shape) {
            w.u64(e);
        }
    }
    for (const auto& entry : tensors) {
        write_values(w, *entry.second);
    }
    w.u32(static_cast<std::uint32_t>(state.accumulators.size()));
    for (std::size_t k = 0; k < state.accumulators.size(); ++k) {
        require_shape(state.accumulators[k], params[k]->shape, "optimizer accumulator");
        write_values(w, state.accumulators[k]);
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, const std::optional<ModelSpec>& expected)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    BinaryReader r(in, path.string());
    read_header(r, path);
    const std::uint8_t prec = r.u8();
    if (prec > 1) {
        throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint: bad precision flag in " + path.string());
    }
    const ModelSpec spec = read_spec(r);
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw ParseError(ParseErrorKind::Truncated, std::string("corrupt checkpoint: ") + e.what());
    }
    if (expected && !(spec == *expected)) {
        throw DataError("checkpoint architecture does not match the expected network: " + path.string());
    }

    Checkpoint<T> ck{Model<T>(spec), {}, static_cast<Precision>(prec)};
    auto tensors = ck.model.named_state();
    const std::uint32_t count = r.u32();
    if (count != tensors.size()) {
        throw DataError("checkpoint has " + std::to_string(count) + " tensors, architecture needs " +
                        std::to_string(tensors.size()));
    }
    for (auto& [name, t] : tensors) {
        const std::uint32_t len = r.u32();
        if (len > 256) {
            throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint manifest in " + path.string());
        }
        std::string stored(len, '\0');
        r.bytes(stored.data(), len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) {
            throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint manifest in " + path.string());
        }
        Shape shape(rank);
        for (std::size_t& e : shape) {
            e = r.u64();
        }
        if (stored != name || shape != t->shape) {
            throw DataError("checkpoint tensor '" + stored + "' " + shape_string(shape) + " does not match '" + name +
                            "' " + shape_string(t->shape));
        }
    }
    for (auto& entry : tensors) {
        read_values(r, *entry.second, ck.stored_precision);
    }
    const std::uint32_t n_acc = r.u32();
    const auto params = ck.model.parameters();
    if (n_acc != 0 && n_acc != params.size()) {
        throw DataError("checkpoint optimizer state does not match the parameters");
    }
    for (std::uint32_t k = 0; k < n_acc; ++k) {
        Tensor<T> acc(params[k]->shape);
        read_values(r, acc, ck.stored_precision);
        ck.optimizer.accumulators.push_back(std::move(acc));
    }
    if (!r.at_end()) {
        throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint: trailing bytes in " + path.string());
    }
    return ck;
}

Precision checkpoint_precision(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    BinaryReader r(in, path.string());
    read_header(r, path);
    const std::uint8_t prec = r.u8();
    if (prec > 1) {
        throw ParseError(ParseErrorKind::Truncated, "corrupt checkpoint: bad precision flag in " + path.string());
    }
    return static_cast<Precision>(prec);
}

template void save_checkpoint<float>(const Model<float>&, const RmspropState<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const Model<double>&, const RmspropState<double>&, const std::filesystem::path&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&, const std::optional<ModelSpec>&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&, const std::optional<ModelSpec>&);

}  // namespace bgsnetd::nn
