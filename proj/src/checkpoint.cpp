#include "dmlab/nn/checkpoint.hpp"

#include "dmlab/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dmlab::nn {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr const char* kMomentM = "adam.m/";
constexpr const char* kMomentV = "adam.v/";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

const NamedArray& Checkpoint::at(const std::string& name) const {
    const auto* a = find(name);
    if (!a) throw InvalidParameter("checkpoint has no array named '" + name + "'");
    return *a;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format"] = "dmlab-checkpoint/1";
    header["meta"] = ckpt.meta;
    auto arrays = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& a : ckpt.arrays) {
        if (a.values.size() != numel(a.shape)) throw ShapeMismatch("checkpoint array '" + a.name + "' size mismatch");
        arrays.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
        offset += a.values.size();
    }
    header["arrays"] = std::move(arrays);
    if (ckpt.adam) {
        header["optimizer"] = {{"kind", "adam"},
                               {"lr", ckpt.adam->lr},
                               {"beta1", ckpt.adam->beta1},
                               {"beta2", ckpt.adam->beta2},
                               {"eps", ckpt.adam->eps},
                               {"steps", ckpt.adam_steps}};
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ckpt.arrays) {
        out.write(reinterpret_cast<const char*>(a.values.data()),
                  static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw IoError("not a dmlab checkpoint: " + path.string());
    }
    const std::uint64_t len = read_u64(in);
    if (len > (1ULL << 30)) throw IoError("implausible checkpoint header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.meta = header.value("meta", nlohmann::json::object());
        for (const auto& e : header.at("arrays")) {
            NamedArray a;
            a.name = e.at("name").get<std::string>();
            a.shape = e.at("shape").get<Shape>();
            const auto count = e.at("count").get<std::size_t>();
            if (count != numel(a.shape)) throw IoError("checkpoint array '" + a.name + "' count mismatch");
            a.values.resize(count);
            ckpt.arrays.push_back(std::move(a));
        }
        if (header.contains("optimizer")) {
            const auto& o = header["optimizer"];
            if (o.at("kind").get<std::string>() != "adam") throw IoError("unknown optimizer in checkpoint");
            ckpt.adam = AdamConfig{o.at("lr").get<double>(), o.at("beta1").get<double>(),
                                   o.at("beta2").get<double>(), o.at("eps").get<double>()};
            ckpt.adam_steps = o.at("steps").get<long long>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint header schema violation: ") + e.what());
    }
    for (auto& a : ckpt.arrays) {
        if (!in.read(reinterpret_cast<char*>(a.values.data()),
                     static_cast<std::streamsize>(a.values.size() * sizeof(double)))) {
            throw IoError("truncated checkpoint payload: " + path.string());
        }
    }
    return ckpt;
}

Checkpoint snapshot(const ParamSet& params, const Adam* opt, nlohmann::json meta) {
    Checkpoint c;
    c.meta = std::move(meta);
    for (const auto& p : params.params()) {
        c.arrays.push_back({p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
    }
    if (opt) {
        c.adam = opt->config();
        c.adam_steps = opt->steps();
        for (const auto& p : params.params()) {
            const auto it = opt->state().find(p.name);
            if (it == opt->state().end()) continue;
            c.arrays.push_back({kMomentM + p.name, p.tensor.shape(), it->second.m});
            c.arrays.push_back({kMomentV + p.name, p.tensor.shape(), it->second.v});
        }
    }
    return c;
}

void load_params(ParamSet& params, const Checkpoint& ckpt) {
    for (auto& p : params.params()) {
        const auto& a = ckpt.at(p.name);
        if (a.shape != p.tensor.shape()) {
            throw ShapeMismatch("checkpoint shape " + shape_str(a.shape) + " for '" + p.name +
                                "' does not match " + shape_str(p.tensor.shape()));
        }
        std::copy(a.values.begin(), a.values.end(), p.tensor.mutable_values().begin());
    }
}

Adam load_adam(const ParamSet& params, const Checkpoint& ckpt) {
    if (!ckpt.adam) throw InvalidParameter("checkpoint carries no optimizer state");
    Adam opt(*ckpt.adam);
    std::map<std::string, Adam::Moments> state;
    for (const auto& p : params.params()) {
        const auto* m = ckpt.find(kMomentM + p.name);
        const auto* v = ckpt.find(kMomentV + p.name);
        if (!m || !v) continue;
        if (m->values.size() != p.tensor.numel() || v->values.size() != p.tensor.numel()) {
            throw ShapeMismatch("optimizer moments for '" + p.name + "' have the wrong size");
        }
        state[p.name] = {m->values, v->values};
    }
    opt.restore(ckpt.adam_steps, std::move(state));
    return opt;
}

}  // namespace dmlab::nn
