#include "objpred/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "objpred/core/types.hpp"

namespace objpred::nn {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'O', 'B', 'J', 'P', 'C', 'K', 'P', 'T'};

enum class EntryKind : std::uint8_t { Tensor = 0, Blob = 1 };

std::uint8_t dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32:
            return 0;
        case torch::kFloat64:
            return 1;
        case torch::kInt64:
            return 2;
        default:
            throw Error("checkpoint: unsupported tensor dtype");
    }
}

torch::ScalarType dtype_from_code(std::uint8_t c) {
    switch (c) {
        case 0:
            return torch::kFloat32;
        case 1:
            return torch::kFloat64;
        case 2:
            return torch::kInt64;
        default:
            throw IoError("checkpoint: unknown dtype code " + std::to_string(c));
    }
}

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw IoError("checkpoint: truncated file");
    }
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_bytes(std::istream& in, std::size_t n) {
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw IoError("checkpoint: truncated file");
    }
    return s;
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
    auto it = tensors.lower_bound(prefix);
    return it != tensors.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

void Checkpoint::save(const fs::path& path) const {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw IoError("cannot write checkpoint '" + path.string() + "'");
        }
        out.write(kMagic, sizeof(kMagic));
        put<std::uint32_t>(out, kCheckpointVersion);
        put<std::uint64_t>(out, config_hash);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size() + blobs.size()));
        for (const auto& [name, tensor] : tensors) {
            put<std::uint8_t>(out, static_cast<std::uint8_t>(EntryKind::Tensor));
            put_string(out, name);
            const auto t = tensor.detach().cpu().contiguous();
            put<std::uint8_t>(out, dtype_code(t.scalar_type()));
            put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
            for (int64_t d : t.sizes()) {
                put<std::int64_t>(out, d);
            }
            out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
        }
        for (const auto& [name, blob] : blobs) {
            put<std::uint8_t>(out, static_cast<std::uint8_t>(EntryKind::Blob));
            put_string(out, name);
            put<std::uint64_t>(out, blob.size());
            out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        }
        if (!out) {
            throw IoError("failed writing checkpoint '" + path.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

Checkpoint Checkpoint::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingCheckpoint("no checkpoint at '" + path.string() + "'");
    }
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic)) {
        throw IoError("'" + path.string() + "' is not a checkpoint file");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config_hash = get<std::uint64_t>(in);
    const auto count = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto kind = static_cast<EntryKind>(get<std::uint8_t>(in));
        const std::string name = get_bytes(in, get<std::uint32_t>(in));
        if (kind == EntryKind::Tensor) {
            const auto dtype = dtype_from_code(get<std::uint8_t>(in));
            const auto ndim = get<std::uint32_t>(in);
            std::vector<int64_t> dims(ndim);
            for (auto& d : dims) {
                d = get<std::int64_t>(in);
            }
            auto t = torch::empty(dims, dtype);
            if (t.nbytes() > 0 && !in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()))) {
                throw IoError("checkpoint: truncated file");
            }
            ckpt.tensors[name] = t;
        } else if (kind == EntryKind::Blob) {
            ckpt.blobs[name] = get_bytes(in, get<std::uint64_t>(in));
        } else {
            throw IoError("checkpoint: unknown entry kind");
        }
    }
    return ckpt;
}

void store_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& p : module.named_parameters(true)) {
        ckpt.tensors[prefix + p.key()] = p.value().detach().clone();
    }
    for (const auto& b : module.named_buffers(true)) {
        ckpt.tensors[prefix + b.key()] = b.value().detach().clone();
    }
}

void restore_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    auto copy = [&](const std::string& name, torch::Tensor& target) {
        auto it = ckpt.tensors.find(prefix + name);
        if (it == ckpt.tensors.end()) {
            throw MissingCheckpoint("checkpoint has no tensor '" + prefix + name + "'");
        }
        if (it->second.sizes() != target.sizes()) {
            throw ShapeError("checkpoint tensor '" + prefix + name + "' has a different shape");
        }
        target.copy_(it->second);
    };
    for (auto& p : module.named_parameters(true)) {
        copy(p.key(), p.value());
    }
    for (auto& b : module.named_buffers(true)) {
        copy(b.key(), b.value());
    }
}

void store_optimizer(Checkpoint& ckpt, const std::string& name, const torch::optim::Optimizer& optimizer) {
    torch::serialize::OutputArchive archive;
    optimizer.save(archive);
    std::ostringstream out;
    archive.save_to(out);
    ckpt.blobs[name] = out.str();
}

void restore_optimizer(const Checkpoint& ckpt, const std::string& name, torch::optim::Optimizer& optimizer) {
    auto it = ckpt.blobs.find(name);
    if (it == ckpt.blobs.end()) {
        throw MissingCheckpoint("checkpoint has no optimizer state '" + name + "'");
    }
    std::istringstream in(it->second);
    torch::serialize::InputArchive archive;
    archive.load_from(in);
    optimizer.load(archive);
}

}  // namespace objpred::nn
