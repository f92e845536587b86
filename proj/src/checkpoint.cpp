#include "vnf/checkpoint.hpp"

#include <fstream>

namespace vnf::checkpoint {

namespace {

const char kMagic[4] = {'V', 'N', 'R', 'F'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  VNF_REQUIRE(in.good(), "checkpoint: truncated stream");
  return v;
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  put<uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(v.size() * sizeof(float)));
}

std::vector<float> get_floats(std::istream& in) {
  uint64_t n = get<uint64_t>(in);
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(n * sizeof(float)));
  VNF_REQUIRE(in.good(), "checkpoint: truncated float block");
  return v;
}

void put_adam(std::ostream& out, const diffnet::AdamState<float>& st) {
  put<int64_t>(out, st.step);
  put_floats(out, st.m);
  put_floats(out, st.v);
}

void get_adam(std::istream& in, diffnet::AdamState<float>& st) {
  st.step = get<int64_t>(in);
  st.m = get_floats(in);
  st.v = get_floats(in);
}

}  // namespace

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_mlp(std::ostream& out, const diffnet::Mlp<float>& mlp) {
  out.write(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, uint32_t(mlp.widths.size()));
  for (int w : mlp.widths) put<uint32_t>(out, uint32_t(w));
  for (int l = 0; l < mlp.layer_count(); ++l) {
    put_floats(out, mlp.w[l]);
    put_floats(out, mlp.b[l]);
  }
}

diffnet::Mlp<float> read_mlp(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  VNF_REQUIRE(in.good() && std::equal(magic, magic + 4, kMagic),
              "mlp blob: bad magic");
  uint32_t version = get<uint32_t>(in);
  VNF_REQUIRE(version == kVersion, "mlp blob: unsupported version");
  uint32_t n = get<uint32_t>(in);
  VNF_REQUIRE(n >= 2 && n < 64, "mlp blob: implausible layer count");
  std::vector<int> widths(n);
  for (auto& w : widths) w = int(get<uint32_t>(in));
  diffnet::Mlp<float> mlp = diffnet::mlp_init<float>(widths, 0);
  for (int l = 0; l < mlp.layer_count(); ++l) {
    mlp.w[l] = get_floats(in);
    mlp.b[l] = get_floats(in);
    VNF_REQUIRE(int(mlp.w[l].size()) == widths[l] * widths[l + 1] &&
                    int(mlp.b[l].size()) == widths[l + 1],
                "mlp blob: tensor shape mismatch");
  }
  return mlp;
}

void save(const std::string& path, const train::Trainer& tr,
          uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  VNF_REQUIRE(out.good(), "checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint64_t>(out, config_hash);

  auto rs = tr.resume_state();
  put<int64_t>(out, rs.step);
  put<uint64_t>(out, rs.rng_state);
  put<double>(out, rs.sim_now);
  put<double>(out, rs.sigma_t);
  put<uint64_t>(out, rs.depth_rr_next);
  put<uint64_t>(out, rs.frames_available);

  // hash tables + their moments
  const auto& tables = tr.field_.tables;
  put<uint32_t>(out, uint32_t(tables.level.size()));
  for (size_t l = 0; l < tables.level.size(); ++l) {
    put_floats(out, tables.level[l]);
    put_adam(out, tr.opt_tables_[l]);
  }

  write_mlp(out, tr.field_.density_net);
  for (int l = 0; l < tr.field_.density_net.layer_count(); ++l) {
    put_adam(out, tr.opt_density_.wst[l]);
    put_adam(out, tr.opt_density_.bst[l]);
  }
  write_mlp(out, tr.field_.color_net);
  for (int l = 0; l < tr.field_.color_net.layer_count(); ++l) {
    put_adam(out, tr.opt_color_.wst[l]);
    put_adam(out, tr.opt_color_.bst[l]);
  }

  put<uint8_t>(out, tr.grid_.kind() == occgrid::GridKind::virus ? 0 : 1);
  put<uint32_t>(out, uint32_t(tr.grid_.resolution()));
  put<double>(out, tr.grid_.occupancy_threshold());
  put<double>(out, tr.grid_.instantngp_threshold());
  put<uint64_t>(out, tr.grid_.update_count());
  put_floats(out, tr.grid_.cells());
}

void load(const std::string& path, train::Trainer& tr, uint64_t config_hash) {
  std::ifstream in(path, std::ios::binary);
  VNF_REQUIRE(in.good(), "checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  VNF_REQUIRE(in.good() && std::equal(magic, magic + 4, kMagic),
              "checkpoint: bad magic");
  uint32_t version = get<uint32_t>(in);
  VNF_REQUIRE(version == kVersion, "checkpoint: unsupported format version");
  uint64_t stored_hash = get<uint64_t>(in);
  VNF_REQUIRE(stored_hash == config_hash,
              "checkpoint: run configuration does not match");

  train::Trainer::ResumeState rs;
  rs.step = get<int64_t>(in);
  rs.rng_state = get<uint64_t>(in);
  rs.sim_now = get<double>(in);
  rs.sigma_t = get<double>(in);
  rs.depth_rr_next = get<uint64_t>(in);
  rs.frames_available = get<uint64_t>(in);
  tr.set_resume_state(rs);

  uint32_t levels = get<uint32_t>(in);
  VNF_REQUIRE(levels == tr.field_.tables.level.size(),
              "checkpoint: hash level count mismatch");
  for (uint32_t l = 0; l < levels; ++l) {
    auto v = get_floats(in);
    VNF_REQUIRE(v.size() == tr.field_.tables.level[l].size(),
                "checkpoint: table size mismatch");
    tr.field_.tables.level[l] = std::move(v);
    get_adam(in, tr.opt_tables_[l]);
  }

  auto dens = read_mlp(in);
  VNF_REQUIRE(dens.widths == tr.field_.density_net.widths,
              "checkpoint: density net shape mismatch");
  tr.field_.density_net = std::move(dens);
  for (int l = 0; l < tr.field_.density_net.layer_count(); ++l) {
    get_adam(in, tr.opt_density_.wst[l]);
    get_adam(in, tr.opt_density_.bst[l]);
  }
  auto col = read_mlp(in);
  VNF_REQUIRE(col.widths == tr.field_.color_net.widths,
              "checkpoint: color net shape mismatch");
  tr.field_.color_net = std::move(col);
  for (int l = 0; l < tr.field_.color_net.layer_count(); ++l) {
    get_adam(in, tr.opt_color_.wst[l]);
    get_adam(in, tr.opt_color_.bst[l]);
  }

  uint8_t kind = get<uint8_t>(in);
  VNF_REQUIRE((kind == 0) ==
                  (tr.grid_.kind() == occgrid::GridKind::virus),
              "checkpoint: grid kind mismatch");
  uint32_t res = get<uint32_t>(in);
  VNF_REQUIRE(int(res) == tr.grid_.resolution(),
              "checkpoint: grid resolution mismatch");
  tr.grid_.set_occupancy_threshold(get<double>(in));
  tr.grid_.set_instantngp_threshold(get<double>(in));
  get<uint64_t>(in);  // update count: informational
  auto cells = get_floats(in);
  VNF_REQUIRE(cells.size() == tr.grid_.cells().size(),
              "checkpoint: grid cell count mismatch");
  tr.grid_.cells() = std::move(cells);
}

uint64_t stored_config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  VNF_REQUIRE(in.good(), "checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  VNF_REQUIRE(in.good() && std::equal(magic, magic + 4, kMagic),
              "checkpoint: bad magic");
  uint32_t version = get<uint32_t>(in);
  VNF_REQUIRE(version == kVersion, "checkpoint: unsupported format version");
  return get<uint64_t>(in);
}

}  // namespace vnf::checkpoint
