#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

namespace objpred::nn {

/// Versioned binary container of named tensors and opaque byte blobs, tagged
/// with a hash of the configuration that produced it.
///
/// Layout (little endian): "OBJPCKPT", u32 version, u64 config hash, u32 entry
/// count, then per entry: u8 kind, u32 name length, name bytes, and either a
/// tensor (u8 dtype, u32 ndim, i64 dims..., raw data) or a blob (u64 size, bytes).
struct Checkpoint {
    std::uint64_t config_hash = 0;
    std::map<std::string, torch::Tensor> tensors;
    std::map<std::string, std::string> blobs;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    [[nodiscard]] bool has_prefix(const std::string& prefix) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

/// Stores every parameter and buffer of `module` under `prefix` + name.
void store_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module);

/// Copies tensors back into `module`. Throws MissingCheckpoint when a name is
/// absent and ShapeError on a shape mismatch.
void restore_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module);

/// Optimizer state round-trips through torch's own archive format as a blob.
void store_optimizer(Checkpoint& ckpt, const std::string& name, const torch::optim::Optimizer& optimizer);
void restore_optimizer(const Checkpoint& ckpt, const std::string& name, torch::optim::Optimizer& optimizer);

}  // namespace objpred::nn
