#include "rgbdsal/checkpoint.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace rgbdsal {

static_assert(std::endian::native == std::endian::little, "checkpoint payload is written in host byte order");

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'G', 'B', 'D', 'S', 'A', 'L', '\0'};

struct Container {
  json header;
  std::vector<char> payload;
};

void write_container(const std::filesystem::path& path, const json& header,
                     const std::vector<const DenseMatrix<float>*>& tensors) {
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  auto tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_data("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* t : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
    if (!out) throw_data("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t fixed = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    if (bytes.size() < sizeof kMagic) throw_data("truncated checkpoint " + path.string());
    throw_data("not a checkpoint file: " + path.string());
  }
  if (bytes.size() < fixed) throw_data("truncated checkpoint " + path.string());
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  std::memcpy(&version, bytes.data() + sizeof kMagic, sizeof version);
  std::memcpy(&len, bytes.data() + sizeof kMagic + sizeof version, sizeof len);
  if (version != kCheckpointVersion) {
    throw_data("checkpoint version mismatch: " + path.string() + " has version " + std::to_string(version) +
               ", expected " + std::to_string(kCheckpointVersion));
  }
  if (len > bytes.size() - fixed) throw_data("truncated checkpoint " + path.string());
  Container c;
  try {
    c.header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(fixed),
                           bytes.begin() + static_cast<std::ptrdiff_t>(fixed + len));
  } catch (const json::exception&) {
    throw_data("corrupt checkpoint header in " + path.string());
  }
  c.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(fixed + len), bytes.end());
  return c;
}

struct TensorEntry {
  std::string name;
  Eigen::Index rows, cols;
};

std::vector<TensorEntry> tensor_index(const json& header, const std::filesystem::path& path) {
  std::vector<TensorEntry> out;
  try {
    for (const auto& t : header.at("tensors")) {
      out.push_back({t.at("name").get<std::string>(), t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>()});
    }
  } catch (const json::exception&) {
    throw_data("corrupt checkpoint header in " + path.string());
  }
  return out;
}

void check_payload_size(const Container& c, std::size_t floats, const std::filesystem::path& path) {
  const std::size_t expected = floats * sizeof(float);
  if (c.payload.size() < expected) throw_data("truncated checkpoint " + path.string());
  if (c.payload.size() > expected) throw_data("checkpoint has trailing bytes: " + path.string());
}

}  // namespace

std::string stage_checkpoint_name(int stage) { return "stage" + std::to_string(stage) + ".ckpt"; }

void save_checkpoint(const ModelBundle<float>& bundle, const std::filesystem::path& path) {
  json tensors = json::array();
  std::vector<const DenseMatrix<float>*> data;
  for (const auto& [name, p] : bundle.params) {
    tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    data.push_back(&p.value);
    data.push_back(&p.moment1);
    data.push_back(&p.moment2);
  }
  const auto& bb = bundle.backbone;
  json header = {
      {"kind", "bundle"},
      {"dtype", "float32"},
      {"backbone", {{"name", bb.name}, {"widths", bb.widths}, {"decoder_width", bb.decoder_width}}},
      {"arch", arch_name(bundle.arch)},
      {"fusion_mode", to_string(bundle.arch.fusion)},
      {"detach_omega", bundle.arch.detach_omega},
      {"working_resolution", bundle.working_resolution},
      {"stages", bundle.stages},
      {"cross_connections_enabled", bundle.cross_connections_enabled},
      {"partial_stage", bundle.partial_stage},
      {"partial_epochs", bundle.partial_epochs},
      {"tensors", tensors},
  };
  write_container(path, header, data);
}

ModelBundle<float> load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const json& h = c.header;
  BackboneConfig bb;
  ArchConfig arch;
  int res = 0;
  std::array<bool, 4> stages{};
  bool cross = false;
  int partial_stage = 0, partial_epochs = 0;
  try {
    if (h.at("kind") != "bundle") throw_data("checkpoint " + path.string() + " holds bare parameters, not a model");
    if (h.at("dtype") != "float32") throw_data("checkpoint dtype mismatch in " + path.string());
    bb.name = h.at("backbone").at("name").get<std::string>();
    bb.widths = h.at("backbone").at("widths").get<std::array<int, 5>>();
    bb.decoder_width = h.at("backbone").at("decoder_width").get<int>();
    arch = parse_arch(h.at("arch").get<std::string>(), parse_fusion_mode(h.at("fusion_mode").get<std::string>()));
    arch.detach_omega = h.at("detach_omega").get<bool>();
    res = h.at("working_resolution").get<int>();
    stages = h.at("stages").get<std::array<bool, 4>>();
    cross = h.at("cross_connections_enabled").get<bool>();
    partial_stage = h.at("partial_stage").get<int>();
    partial_epochs = h.at("partial_epochs").get<int>();
  } catch (const json::exception&) {
    throw_data("corrupt checkpoint header in " + path.string());
  }
  for (int k = 1; k < 4; ++k) {
    if (stages[k] && !stages[k - 1]) throw_data("checkpoint stage flags are not monotone in " + path.string());
  }
  const auto index = tensor_index(h, path);
  std::size_t floats = 0;
  for (const auto& t : index) floats += static_cast<std::size_t>(t.rows * t.cols) * 3;
  check_payload_size(c, floats, path);

  ModelBundle<float> b = make_bundle<float>(bb, arch, res, 0);
  b.stages = stages;
  b.cross_connections_enabled = cross;
  b.partial_stage = partial_stage;
  b.partial_epochs = partial_epochs;
  std::set<std::string> seen;
  const char* src = c.payload.data();
  for (const auto& t : index) {
    if (!b.params.contains(t.name)) throw_data("checkpoint has unknown tensor '" + t.name + "'");
    auto& p = b.params.at(t.name);
    if (p.value.rows() != t.rows || p.value.cols() != t.cols) {
      throw_data("checkpoint shape mismatch for '" + t.name + "': file " + shape_string(t.rows, t.cols) +
                 ", model " + shape_string(p.value.rows(), p.value.cols()));
    }
    for (DenseMatrix<float>* dst : {&p.value, &p.moment1, &p.moment2}) {
      const std::size_t n = static_cast<std::size_t>(dst->size()) * sizeof(float);
      std::memcpy(dst->data(), src, n);
      src += n;
    }
    seen.insert(t.name);
  }
  for (const auto& [name, p] : b.params) {
    if (!seen.count(name)) throw_data("checkpoint is missing tensor '" + name + "'");
  }
  return b;
}

void save_parameters(const nn::ParameterStore<float>& params, const std::filesystem::path& path) {
  json tensors = json::array();
  std::vector<const DenseMatrix<float>*> data;
  for (const auto& [name, p] : params) {
    tensors.push_back({{"name", name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
    data.push_back(&p.value);
  }
  write_container(path, {{"kind", "parameters"}, {"dtype", "float32"}, {"tensors", tensors}}, data);
}

nn::ParameterStore<float> load_parameters(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.header.value("kind", "") != "parameters") throw_data("not a parameter file: " + path.string());
  const auto index = tensor_index(c.header, path);
  std::size_t floats = 0;
  for (const auto& t : index) floats += static_cast<std::size_t>(t.rows * t.cols);
  check_payload_size(c, floats, path);
  nn::ParameterStore<float> store;
  const char* src = c.payload.data();
  for (const auto& t : index) {
    DenseMatrix<float> m(t.rows, t.cols);
    std::memcpy(m.data(), src, static_cast<std::size_t>(m.size()) * sizeof(float));
    src += m.size() * static_cast<std::ptrdiff_t>(sizeof(float));
    store.add(t.name, std::move(m));
  }
  return store;
}

}  // namespace rgbdsal
