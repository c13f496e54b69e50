#include "svos/params.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "svos/error.hpp"

namespace svos {
namespace net {

namespace {

std::string stages_text(const std::vector<ConvStage>& st) {
  std::string s;
  for (size_t i = 0; i < st.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(st[i].out_ch) + ":" + std::to_string(st[i].stride) + ":" +
         std::to_string(st[i].res_blocks);
  }
  return s;
}

std::vector<ConvStage> stages_parse(const std::string& s) {
  std::vector<ConvStage> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    ConvStage c;
    if (std::sscanf(item.c_str(), "%d:%d:%d", &c.out_ch, &c.stride, &c.res_blocks) != 3)
      throw validation_error("arch: bad stage entry '" + item + "'");
    out.push_back(c);
  }
  return out;
}

std::string ints_text(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> ints_parse(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

Tensor<float> he_conv(int oc, int ic, int k, Rng& rng, bool linear_head) {
  Tensor<float> w({oc, ic, k, k});
  double fan_in = static_cast<double>(ic) * k * k;
  double s = std::sqrt((linear_head ? 1.0 : 2.0) / fan_in);
  for (int i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rng.normal() * s);
  return w;
}

void add_conv(ModelParams& p, const std::string& name, int oc, int ic, int k, Rng& rng,
              bool linear_head = false) {
  p.tensors[name + ".w"] = he_conv(oc, ic, k, rng, linear_head);
  p.tensors[name + ".b"] = Tensor<float>({oc});
}

void add_res(ModelParams& p, const std::string& name, int ch, Rng& rng) {
  add_conv(p, name + ".c1", ch, ch, 3, rng);
  add_conv(p, name + ".c2", ch, ch, 3, rng);
}

void add_trunk(ModelParams& p, const std::string& net, int in_ch,
               const std::vector<ConvStage>& stages, Rng& rng) {
  int prev = in_ch;
  for (size_t i = 0; i < stages.size(); ++i) {
    std::string sp = net + ".s" + std::to_string(i);
    add_conv(p, sp + ".conv", stages[i].out_ch, prev, 3, rng);
    for (int j = 0; j < stages[i].res_blocks; ++j)
      add_res(p, sp + ".r" + std::to_string(j), stages[i].out_ch, rng);
    prev = stages[i].out_ch;
  }
}

}  // namespace

std::string ArchDescriptor::to_text() const {
  std::string s;
  s += "e_stages=" + stages_text(e_stages) + "\n";
  s += "e_dim=" + std::to_string(e_dim) + "\n";
  s += "v_stages=" + stages_text(v_stages) + "\n";
  s += "v_dim=" + std::to_string(v_dim) + "\n";
  s += "d_base=" + std::to_string(d_base) + "\n";
  s += "d_up_ch=" + ints_text(d_up_ch) + "\n";
  return s;
}

ArchDescriptor ArchDescriptor::from_text(const std::string& text) {
  ArchDescriptor a;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw validation_error("arch: bad line '" + line + "'");
    std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "e_stages") a.e_stages = stages_parse(v);
    else if (k == "e_dim") a.e_dim = std::stoi(v);
    else if (k == "v_stages") a.v_stages = stages_parse(v);
    else if (k == "v_dim") a.v_dim = std::stoi(v);
    else if (k == "d_base") a.d_base = std::stoi(v);
    else if (k == "d_up_ch") a.d_up_ch = ints_parse(v);
    else throw validation_error("arch: unknown key '" + k + "'");
  }
  a.validate();
  return a;
}

bool ArchDescriptor::operator==(const ArchDescriptor& o) const {
  return to_text() == o.to_text();
}

ModelParams init_parameters(const ArchDescriptor& arch, uint64_t seed) {
  arch.validate();
  if (arch.e_stages[0].stride != 1)
    throw validation_error("arch: first E stage must keep full resolution (skip source)");
  ModelParams p;
  p.arch = arch;
  Rng rng(seed);

  add_trunk(p, "e", 3, arch.e_stages, rng);
  add_conv(p, "e.head", arch.e_dim, arch.e_stages.back().out_ch, 1, rng, true);

  add_trunk(p, "v", 4, arch.v_stages, rng);
  add_conv(p, "v.head", arch.v_dim, arch.v_stages.back().out_ch, 1, rng, true);

  add_conv(p, "d.in", arch.d_base, 2 * arch.v_dim, 1, rng);
  add_res(p, "d.res", arch.d_base, rng);
  // skip widths, deepest first
  std::vector<int> skip_ch;
  for (int i = static_cast<int>(arch.e_stages.size()) - 1; i >= 1; --i)
    if (arch.e_stages[static_cast<size_t>(i)].stride == 2)
      skip_ch.push_back(arch.e_stages[static_cast<size_t>(i - 1)].out_ch);
  int prev = arch.d_base;
  for (size_t i = 0; i < arch.d_up_ch.size(); ++i) {
    std::string up = "d.up" + std::to_string(i);
    add_conv(p, up + ".fuse", arch.d_up_ch[i], prev + skip_ch[i], 1, rng);
    if (i == 0) add_res(p, up + ".res", arch.d_up_ch[0], rng);
    prev = arch.d_up_ch[i];
  }
  add_conv(p, "d.out", 2, prev, 1, rng, true);
  return p;
}

void save_checkpoint(const ModelParams& p, const std::string& path) {
  std::ostringstream head;
  head << kCheckpointVersion << "\n";
  std::string arch = p.arch.to_text();
  head << "arch_lines " << std::count(arch.begin(), arch.end(), '\n') << "\n" << arch;
  head << "tensors " << p.tensors.size() << "\n";
  size_t offset = 0;
  for (const auto& [name, t] : p.tensors) {
    head << name << " float32 " << t.rank();
    for (int d : t.shape) head << " " << d;
    head << " " << offset << "\n";
    offset += static_cast<size_t>(t.numel()) * sizeof(float);
  }
  head << "payload " << offset << "\n";

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot write checkpoint: " + path);
  f << head.str();
  for (const auto& [name, t] : p.tensors)
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!f) throw io_error("short write on checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot read checkpoint: " + path);
  std::string version;
  if (!std::getline(f, version)) throw io_error("checkpoint truncated: " + path);
  if (version != kCheckpointVersion)
    throw validation_error("checkpoint version mismatch: file has '" + version +
                           "', this build expects '" + kCheckpointVersion + "'");
  std::string tag;
  int arch_lines = 0;
  f >> tag >> arch_lines;
  if (tag != "arch_lines") throw io_error("checkpoint: bad arch header");
  f.ignore();
  std::string arch_text, line;
  for (int i = 0; i < arch_lines; ++i) {
    if (!std::getline(f, line)) throw io_error("checkpoint truncated in arch block");
    arch_text += line + "\n";
  }
  ModelParams p;
  p.version = version;
  p.arch = ArchDescriptor::from_text(arch_text);

  size_t n_tensors = 0;
  f >> tag >> n_tensors;
  if (tag != "tensors") throw io_error("checkpoint: bad tensor header");
  struct Entry {
    std::string name;
    std::vector<int> shape;
    size_t offset;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < n_tensors; ++i) {
    Entry e;
    std::string dtype;
    int rank = 0;
    f >> e.name >> dtype >> rank;
    if (!f || dtype != "float32") throw io_error("checkpoint: bad tensor entry");
    e.shape.resize(static_cast<size_t>(rank));
    for (int d = 0; d < rank; ++d) f >> e.shape[static_cast<size_t>(d)];
    f >> e.offset;
    entries.push_back(std::move(e));
  }
  size_t payload = 0;
  f >> tag >> payload;
  if (!f || tag != "payload") throw io_error("checkpoint: bad payload header");
  f.ignore();

  std::streampos base = f.tellg();
  f.seekg(0, std::ios::end);
  size_t available = static_cast<size_t>(f.tellg() - base);
  if (available < payload)
    throw io_error("checkpoint truncated: payload needs " + std::to_string(payload) +
                   " bytes, file has " + std::to_string(available));
  for (const auto& e : entries) {
    Tensor<float> t(e.shape);
    f.seekg(base + static_cast<std::streamoff>(e.offset));
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw io_error("checkpoint truncated reading tensor " + e.name);
    p.tensors[e.name] = std::move(t);
  }
  return p;
}

ModelParams load_checkpoint(const std::string& path, const ArchDescriptor& expected) {
  ModelParams p = load_checkpoint(path);
  ModelParams ref = init_parameters(expected, 0);
  for (const auto& [name, t] : ref.tensors) {
    auto it = p.tensors.find(name);
    if (it == p.tensors.end())
      throw validation_error("checkpoint is missing tensor " + name);
    if (it->second.shape != t.shape)
      throw validation_error("checkpoint shape mismatch on " + name + ": file has " +
                             shape_str(it->second.shape) + ", descriptor wants " +
                             shape_str(t.shape));
  }
  if (p.tensors.size() != ref.tensors.size())
    throw validation_error("checkpoint holds extra tensors for this descriptor");
  return p;
}

}  // namespace net
}  // namespace svos
