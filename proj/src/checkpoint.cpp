#include "oocrel/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <bit>
#include <fstream>

#include "oocrel/errors.hpp"

namespace oocrel::lm {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'R', 'L'};
constexpr uint32_t kVersion = 1;

// Parameter blocks are raw little-endian; this build targets little-endian
// hosts only.
static_assert(std::endian::native == std::endian::little,
              "checkpoint format requires a little-endian host");

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i32(std::ostream& out, int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

int32_t read_i32(std::istream& in) {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::string read_string(std::istream& in) {
    const uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

} // namespace

void save_checkpoint(const LanguageModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);

    const TransformerConfig& config = model.config();
    write_i32(out, config.layers);
    write_i32(out, config.heads);
    write_i32(out, config.d_model);
    write_i32(out, config.d_ff);
    write_i32(out, config.context);
    write_u64(out, config.init_seed);

    out.put(model.frozen() ? 1 : 0);
    write_i32(out, model.frozen_base());
    write_string(out, model.frozen_digest());

    const Vocabulary& vocab = model.vocab();
    write_u32(out, static_cast<uint32_t>(vocab.size()));
    write_u32(out, static_cast<uint32_t>(vocab.base_size()));
    for (int i = 0; i < vocab.size(); ++i) {
        write_string(out, vocab.token_of(i));
    }

    uint32_t tensor_count = 0;
    model.params().for_each_tensor([&](const char*, const float*, int64_t) { ++tensor_count; });
    write_u32(out, tensor_count);
    model.params().for_each_tensor([&](const char* name, const float* data, int64_t size) {
        write_string(out, name);
        write_u64(out, static_cast<uint64_t>(size));
        out.write(reinterpret_cast<const char*>(data),
                  static_cast<std::streamsize>(size) * static_cast<std::streamsize>(sizeof(float)));
    });
    if (!out) {
        throw IoError("failed while writing checkpoint: " + path);
    }
}

LanguageModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path);
    }
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a checkpoint file: " + path);
    }
    const uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }

    TransformerConfig config;
    config.layers = read_i32(in);
    config.heads = read_i32(in);
    config.d_model = read_i32(in);
    config.d_ff = read_i32(in);
    config.context = read_i32(in);
    config.init_seed = read_u64(in);
    config.validate();

    const bool frozen = in.get() == 1;
    const int frozen_base = read_i32(in);
    const std::string digest = read_string(in);

    const uint32_t vocab_total = read_u32(in);
    const uint32_t vocab_base = read_u32(in);
    std::vector<std::string> tokens;
    tokens.reserve(vocab_total);
    for (uint32_t i = 0; i < vocab_total; ++i) {
        tokens.push_back(read_string(in));
    }
    Vocabulary vocab = Vocabulary::from_tokens(tokens, static_cast<int>(vocab_base));

    ModelParams<float> params;
    params.resize(config, static_cast<int>(vocab_total), static_cast<int>(vocab_base));
    const uint32_t tensor_count = read_u32(in);
    uint32_t expected = 0;
    params.for_each_tensor([&](const char*, float*, int64_t) { ++expected; });
    if (tensor_count != expected) {
        throw IoError("checkpoint tensor count mismatch");
    }
    params.for_each_tensor([&](const char* name, float* data, int64_t size) {
        const std::string stored_name = read_string(in);
        if (stored_name != name) {
            throw IoError("checkpoint tensor order mismatch: expected " + std::string(name) +
                          ", found " + stored_name);
        }
        const uint64_t stored_size = read_u64(in);
        if (stored_size != static_cast<uint64_t>(size)) {
            throw IoError("checkpoint tensor size mismatch for " + stored_name);
        }
        in.read(reinterpret_cast<char*>(data),
                static_cast<std::streamsize>(size) * static_cast<std::streamsize>(sizeof(float)));
    });
    if (!in) {
        throw IoError("truncated checkpoint: " + path);
    }

    LanguageModel model;
    model.restore(config, std::move(vocab), std::move(params), frozen, digest, frozen_base);
    if (frozen && model.compute_base_digest() != digest) {
        throw IoError("checkpoint digest mismatch (corrupt or tampered file)");
    }
    return model;
}

} // namespace oocrel::lm
