// SPDX-License-Identifier: Apache-2.0
//
// Task allocation files: which layers run on which devices, how each layer
// is split and coded.
//
//   {"model": "name", "model_file": "optional/relative/path.json",
//    "stages": [{"layers": [1, 2], "method": "conv_channel" | ... | "whole",
//                "devices": [0, 1],
//                "coded": {"groups": [[0, 1]], "devices": [5]}}],
//    "roster": [{"id": 0, "addr": "127.0.0.1:7000"}]}
//
// Group members and coded devices are roster ids. In a split stage only the
// first layer is split; the remaining (pool) layers run at the merge point.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdc/model.hpp"
#include "cdc/splitter.hpp"

namespace cdc {

struct CodedAlloc {
  std::vector<std::vector<std::uint32_t>> groups;
  std::vector<std::uint32_t> devices;  // one per group
  friend bool operator==(const CodedAlloc&, const CodedAlloc&) = default;
};

struct StageAlloc {
  std::vector<std::uint32_t> layers;
  std::optional<SplitMethod> method;  // nullopt: whole stage on devices[0]
  std::vector<std::uint32_t> devices;
  std::optional<CodedAlloc> coded;

  bool is_split() const noexcept { return method.has_value(); }
  std::vector<std::uint32_t> all_devices() const;
  friend bool operator==(const StageAlloc&, const StageAlloc&) = default;
};

struct RosterEntry {
  std::uint32_t id = 0;
  std::string addr;
  friend bool operator==(const RosterEntry&, const RosterEntry&) = default;
};

struct AllocationFile {
  std::string model;
  std::string model_file;  // empty when not given
  std::vector<StageAlloc> stages;
  std::vector<RosterEntry> roster;

  // Every device some stage uses (base and coded).
  std::set<std::uint32_t> required_devices() const;
  bool is_coded() const;
  friend bool operator==(const AllocationFile&, const AllocationFile&) = default;
};

AllocationFile parse_allocation(std::string_view json_text);
AllocationFile load_allocation(const std::filesystem::path& path);
std::string allocation_to_json(const AllocationFile& alloc);
void save_allocation(const AllocationFile& alloc, const std::filesystem::path& path);

// Throws AllocationInvalid describing the first problem found.
void validate_allocation(const AllocationFile& alloc, const ModelSpec& model);

// Group membership of a coded stage as plan-local device indices.
std::vector<std::vector<std::size_t>> local_groups(const StageAlloc& stage);

// First entry whose required devices are all alive. The catalog must be
// ordered by required device count, largest first.
const AllocationFile& fallback_select(std::span<const AllocationFile> catalog, const std::set<std::uint32_t>& alive);

// One split stage per weighted layer, each over `n` fresh devices (fc_output
// for fc, conv_channel for conv), pool layers fused into the preceding
// stage. With `coded`, every stage gets one coded device covering all n.
AllocationFile uniform_allocation(const ModelSpec& model, std::size_t n, bool coded);

}  // namespace cdc
