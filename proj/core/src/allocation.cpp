// SPDX-License-Identifier: Apache-2.0

#include "cdc/allocation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace cdc {

using nlohmann::ordered_json;

std::vector<std::uint32_t> StageAlloc::all_devices() const {
  std::vector<std::uint32_t> out = devices;
  if (coded) out.insert(out.end(), coded->devices.begin(), coded->devices.end());
  return out;
}

std::set<std::uint32_t> AllocationFile::required_devices() const {
  std::set<std::uint32_t> out;
  for (const auto& s : stages) {
    for (auto d : s.all_devices()) out.insert(d);
  }
  return out;
}

bool AllocationFile::is_coded() const {
  return std::any_of(stages.begin(), stages.end(), [](const StageAlloc& s) { return s.coded.has_value(); });
}

namespace {

std::vector<std::uint32_t> id_list(const ordered_json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array of ids");
  std::vector<std::uint32_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) throw ParseError(std::string(what) + " must hold non-negative integers");
    out.push_back(v.get<std::uint32_t>());
  }
  return out;
}

AllocationFile parse_doc(std::string_view text) {
  ordered_json doc = ordered_json::parse(text);
  if (!doc.is_object()) throw ParseError("allocation file must be a JSON object");
  AllocationFile out;
  out.model = doc.value("model", std::string());
  out.model_file = doc.value("model_file", std::string());
  if (!doc.contains("stages") || !doc.at("stages").is_array()) throw ParseError("allocation needs a 'stages' array");
  for (const auto& js : doc.at("stages")) {
    StageAlloc s;
    s.layers = id_list(js.at("layers"), "stage layers");
    const std::string method = js.value("method", std::string("whole"));
    if (method != "whole") s.method = parse_split_method(method);
    s.devices = id_list(js.at("devices"), "stage devices");
    if (js.contains("coded") && !js.at("coded").is_null()) {
      const auto& jc = js.at("coded");
      CodedAlloc c;
      if (!jc.contains("groups") || !jc.at("groups").is_array()) throw ParseError("coded entry needs 'groups'");
      for (const auto& g : jc.at("groups")) c.groups.push_back(id_list(g, "coded group"));
      if (!jc.contains("devices")) throw ParseError("coded entry needs 'devices' (one roster id per group)");
      c.devices = id_list(jc.at("devices"), "coded devices");
      s.coded = std::move(c);
    }
    out.stages.push_back(std::move(s));
  }
  if (doc.contains("roster")) {
    if (!doc.at("roster").is_array()) throw ParseError("'roster' must be an array");
    for (const auto& jr : doc.at("roster")) {
      if (!jr.contains("id") || !jr.at("id").is_number_unsigned()) throw ParseError("roster entry needs an 'id'");
      out.roster.push_back({jr.at("id").get<std::uint32_t>(), jr.value("addr", std::string())});
    }
  }
  return out;
}

[[noreturn]] void invalid(std::size_t stage, const std::string& what) {
  throw AllocationInvalid("stage " + std::to_string(stage) + ": " + what);
}

}  // namespace

AllocationFile parse_allocation(std::string_view json_text) {
  try {
    return parse_doc(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("allocation file: ") + e.what());
  }
}

AllocationFile load_allocation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open allocation file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_allocation(ss.str());
}

std::string allocation_to_json(const AllocationFile& alloc) {
  ordered_json doc;
  doc["model"] = alloc.model;
  if (!alloc.model_file.empty()) doc["model_file"] = alloc.model_file;
  doc["stages"] = ordered_json::array();
  for (const auto& s : alloc.stages) {
    ordered_json js;
    js["layers"] = s.layers;
    js["method"] = s.method ? std::string(to_string(*s.method)) : std::string("whole");
    js["devices"] = s.devices;
    if (s.coded) js["coded"] = {{"groups", s.coded->groups}, {"devices", s.coded->devices}};
    doc["stages"].push_back(std::move(js));
  }
  doc["roster"] = ordered_json::array();
  for (const auto& r : alloc.roster) doc["roster"].push_back({{"id", r.id}, {"addr", r.addr}});
  return doc.dump(2) + "\n";
}

void save_allocation(const AllocationFile& alloc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write allocation file " + path.string());
  out << allocation_to_json(alloc);
  if (!out) throw IoError("write failed for " + path.string());
}

void validate_allocation(const AllocationFile& alloc, const ModelSpec& model) {
  if (!alloc.model.empty() && !model.name.empty() && alloc.model != model.name) {
    throw AllocationInvalid("allocation is for model '" + alloc.model + "', not '" + model.name + "'");
  }
  std::set<std::uint32_t> roster;
  for (const auto& r : alloc.roster) {
    if (r.id == 0xffff'ffffu) throw AllocationInvalid("device id 4294967295 is reserved for the coordinator");
    if (!roster.insert(r.id).second) throw AllocationInvalid("roster lists device " + std::to_string(r.id) + " twice");
  }
  if (alloc.stages.empty()) throw AllocationInvalid("allocation has no stages");

  std::size_t next_layer = 0;
  for (std::size_t si = 0; si < alloc.stages.size(); ++si) {
    const auto& s = alloc.stages[si];
    if (s.layers.empty()) invalid(si, "no layers");
    for (auto id : s.layers) {
      if (next_layer >= model.layers.size() || model.layers[next_layer].id != id) {
        invalid(si, "layer " + std::to_string(id) + " is out of model order or covered twice");
      }
      ++next_layer;
    }
    if (s.devices.empty()) invalid(si, "no devices");
    std::set<std::uint32_t> seen;
    for (auto d : s.all_devices()) {
      if (!seen.insert(d).second) invalid(si, "device " + std::to_string(d) + " appears twice");
      if (!roster.empty() && !roster.count(d)) invalid(si, "device " + std::to_string(d) + " is not in the roster");
    }
    const auto& first = model.layer(s.layers.front());
    if (!s.method) {
      if (s.devices.size() != 1) invalid(si, "a whole stage runs on exactly one device");
      if (s.coded) invalid(si, "only split stages can be coded");
      continue;
    }
    if (!first.has_weights()) invalid(si, "a split stage must start with an fc or conv layer");
    for (std::size_t i = 1; i < s.layers.size(); ++i) {
      if (!model.layer(s.layers[i]).is_pool()) invalid(si, "only pool layers may follow the split layer");
    }
    try {
      (void)plan_split(first, *s.method, s.devices.size());
    } catch (const Error& e) {
      invalid(si, e.what());
    }
    if (s.coded) {
      if (!suitability(*s.method).suitable_for_cdc) {
        invalid(si, std::string(to_string(*s.method)) + " cannot be coded");
      }
      if (s.coded->groups.empty()) invalid(si, "coded entry without groups");
      if (s.coded->groups.size() != s.coded->devices.size()) invalid(si, "coded groups and devices differ in count");
      for (const auto& g : s.coded->groups) {
        if (g.empty()) invalid(si, "empty coded group");
        std::set<std::uint32_t> members;
        for (auto d : g) {
          if (std::find(s.devices.begin(), s.devices.end(), d) == s.devices.end()) {
            invalid(si, "coded group member " + std::to_string(d) + " is not a base device of the stage");
          }
          if (!members.insert(d).second) invalid(si, "coded group lists device " + std::to_string(d) + " twice");
        }
      }
    }
  }
  if (next_layer != model.layers.size()) {
    throw AllocationInvalid("layer " + std::to_string(model.layers[next_layer].id) + " is not covered by any stage");
  }
}

std::vector<std::vector<std::size_t>> local_groups(const StageAlloc& stage) {
  std::vector<std::vector<std::size_t>> out;
  if (!stage.coded) return out;
  for (const auto& g : stage.coded->groups) {
    std::vector<std::size_t> local;
    for (auto d : g) {
      auto it = std::find(stage.devices.begin(), stage.devices.end(), d);
      if (it == stage.devices.end()) throw AllocationInvalid("coded group names a device outside the stage");
      local.push_back(static_cast<std::size_t>(it - stage.devices.begin()));
    }
    out.push_back(std::move(local));
  }
  return out;
}

const AllocationFile& fallback_select(std::span<const AllocationFile> catalog, const std::set<std::uint32_t>& alive) {
  for (std::size_t i = 1; i < catalog.size(); ++i) {
    if (catalog[i].required_devices().size() > catalog[i - 1].required_devices().size()) {
      throw InvalidArgument("fallback catalog must be ordered by device count, largest first");
    }
  }
  for (const auto& a : catalog) {
    const auto need = a.required_devices();
    if (std::includes(alive.begin(), alive.end(), need.begin(), need.end())) return a;
  }
  throw NoFeasibleAllocation("no allocation in the catalog runs on the " + std::to_string(alive.size()) +
                             " surviving devices");
}

AllocationFile uniform_allocation(const ModelSpec& model, std::size_t n, bool coded) {
  if (n == 0) throw InvalidArgument("uniform_allocation needs n >= 1");
  AllocationFile out;
  out.model = model.name;
  std::vector<std::uint32_t> base(n);
  for (std::size_t d = 0; d < n; ++d) base[d] = static_cast<std::uint32_t>(d);
  const auto coded_id = static_cast<std::uint32_t>(n);
  for (const auto& layer : model.layers) {
    if (layer.is_pool() && !out.stages.empty()) {
      out.stages.back().layers.push_back(layer.id);
      continue;
    }
    StageAlloc s;
    s.layers = {layer.id};
    const SplitMethod m = layer.is_fc() ? SplitMethod::FcOutput : SplitMethod::ConvChannel;
    const std::size_t extent = layer.is_fc() ? layer.fc().outputs : layer.conv().geometry.filters;
    if (n >= 2 && extent >= n) {
      s.method = m;
      s.devices = base;
      if (coded) s.coded = CodedAlloc{{base}, {coded_id}};
    } else {
      s.devices = {0};
    }
    out.stages.push_back(std::move(s));
  }
  for (std::size_t d = 0; d < n; ++d) out.roster.push_back({static_cast<std::uint32_t>(d), ""});
  if (coded) out.roster.push_back({coded_id, ""});
  return out;
}

}  // namespace cdc
