#include "beieq/diagnostics_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace beieq {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); }

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) config_fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) config_fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& section, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) config_fail(section + "." + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_fail(section + "." + key, "must be finite");
  return d;
}

int get_int(const json& obj, const std::string& section, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) config_fail(section + "." + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const std::string& section, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) config_fail(section + "." + key, "expected a string");
  return v.get<std::string>();
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  return root.contains(name) ? root.at(name) : empty;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
}

double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

}  // namespace

// --- config -------------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  reject_unknown(root, "", {"grid", "params", "time", "solver", "initial", "output", "debug"});

  RunConfig cfg;
  SchemeConfig& sc = cfg.scheme;

  const json& g = section(root, "grid");
  reject_unknown(g, "grid", {"nx", "ny", "lx", "ly", "bc"});
  sc.grid.nx = get_int(g, "grid", "nx", sc.grid.nx);
  sc.grid.ny = get_int(g, "grid", "ny", sc.grid.ny);
  sc.grid.lx = get_number(g, "grid", "lx", sc.grid.lx);
  sc.grid.ly = get_number(g, "grid", "ly", sc.grid.ly);
  const std::string bc = get_string(g, "grid", "bc", "dirichlet");
  if (bc == "dirichlet") {
    sc.grid.bc = Boundary::kDirichlet;
  } else if (bc == "periodic") {
    sc.grid.bc = Boundary::kPeriodic;
  } else {
    config_fail("grid.bc", "expected \"dirichlet\" or \"periodic\"");
  }
  if (sc.grid.nx < 4) config_fail("grid.nx", "must be >= 4");
  if (sc.grid.ny < 4) config_fail("grid.ny", "must be >= 4");
  if (!(sc.grid.lx > 0.0)) config_fail("grid.lx", "must be > 0");
  if (!(sc.grid.ly > 0.0)) config_fail("grid.ly", "must be > 0");

  const json& p = section(root, "params");
  reject_unknown(p, "params", {"a", "b", "c", "L", "M", "xi", "mu", "A0"});
  MaterialParams& mp = sc.params;
  mp.a = get_number(p, "params", "a", mp.a);
  mp.b = get_number(p, "params", "b", mp.b);
  mp.c = get_number(p, "params", "c", mp.c);
  mp.L = get_number(p, "params", "L", mp.L);
  mp.M = get_number(p, "params", "M", mp.M);
  mp.xi = get_number(p, "params", "xi", mp.xi);
  mp.mu = get_number(p, "params", "mu", mp.mu);
  if (!(mp.c > 0.0)) config_fail("params.c", "must be > 0");
  mp.A0 = get_number(p, "params", "A0", MaterialParams::default_A0(mp.a, mp.c));

  const json& t = section(root, "time");
  reject_unknown(t, "time", {"dt", "t_end"});
  sc.dt = get_number(t, "time", "dt", sc.dt);
  sc.t_end = get_number(t, "time", "t_end", sc.t_end);

  const json& s = section(root, "solver");
  reject_unknown(s, "solver", {"tol", "max_iter", "poisson_tol", "poisson_max_iter"});
  sc.solver.tol = get_number(s, "solver", "tol", sc.solver.tol);
  sc.solver.max_iter = get_int(s, "solver", "max_iter", sc.solver.max_iter);
  sc.solver.poisson_tol = get_number(s, "solver", "poisson_tol", sc.solver.poisson_tol);
  sc.solver.poisson_max_iter = get_int(s, "solver", "poisson_max_iter", sc.solver.poisson_max_iter);

  const json& i = section(root, "initial");
  reject_unknown(i, "initial", {"preset", "amplitude", "seed", "p0", "snapshot"});
  cfg.initial.preset = get_string(i, "initial", "preset", cfg.initial.preset);
  if (cfg.initial.preset != "zero" && cfg.initial.preset != "smooth-modes" &&
      cfg.initial.preset != "random-perturbation") {
    config_fail("initial.preset", "expected zero, smooth-modes or random-perturbation");
  }
  cfg.initial.amplitude = get_number(i, "initial", "amplitude", cfg.initial.amplitude);
  if (i.contains("seed")) {
    if (!i.at("seed").is_number_unsigned()) config_fail("initial.seed", "expected a non-negative integer");
    cfg.initial.seed = i.at("seed").get<std::uint64_t>();
  }
  cfg.initial.p0 = get_number(i, "initial", "p0", cfg.initial.p0);
  cfg.initial.snapshot = get_string(i, "initial", "snapshot", "");

  const json& o = section(root, "output");
  reject_unknown(o, "output", {"energy_csv", "snapshot_dir", "snapshot_every"});
  cfg.output.energy_csv = get_string(o, "output", "energy_csv", "");
  cfg.output.snapshot_dir = get_string(o, "output", "snapshot_dir", "");
  cfg.output.snapshot_every = get_int(o, "output", "snapshot_every", 0);
  if (cfg.output.snapshot_every < 0) config_fail("output.snapshot_every", "must be >= 0");

  const json& d = section(root, "debug");
  reject_unknown(d, "debug", {"full_matrix"});
  if (d.contains("full_matrix")) {
    if (!d.at("full_matrix").is_boolean()) config_fail("debug.full_matrix", "expected a boolean");
    sc.layout = d.at("full_matrix").get<bool>() ? TensorLayout::kFull : TensorLayout::kSymTraceless;
  }

  sc.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string dump_config(const RunConfig& cfg) {
  const SchemeConfig& sc = cfg.scheme;
  json root;
  root["grid"] = {{"nx", sc.grid.nx},
                  {"ny", sc.grid.ny},
                  {"lx", sc.grid.lx},
                  {"ly", sc.grid.ly},
                  {"bc", sc.grid.bc == Boundary::kPeriodic ? "periodic" : "dirichlet"}};
  root["params"] = {{"a", sc.params.a},   {"b", sc.params.b},   {"c", sc.params.c},
                    {"L", sc.params.L},   {"M", sc.params.M},   {"xi", sc.params.xi},
                    {"mu", sc.params.mu}, {"A0", sc.params.A0}};
  root["time"] = {{"dt", sc.dt}, {"t_end", sc.t_end}};
  root["solver"] = {{"tol", sc.solver.tol},
                    {"max_iter", sc.solver.max_iter},
                    {"poisson_tol", sc.solver.poisson_tol},
                    {"poisson_max_iter", sc.solver.poisson_max_iter}};
  root["initial"] = {{"preset", cfg.initial.preset},
                     {"amplitude", cfg.initial.amplitude},
                     {"seed", cfg.initial.seed},
                     {"p0", cfg.initial.p0}};
  if (!cfg.initial.snapshot.empty()) root["initial"]["snapshot"] = cfg.initial.snapshot;
  root["output"] = {{"energy_csv", cfg.output.energy_csv},
                    {"snapshot_dir", cfg.output.snapshot_dir},
                    {"snapshot_every", cfg.output.snapshot_every}};
  root["debug"] = {{"full_matrix", sc.layout == TensorLayout::kFull}};
  return root.dump(2) + "\n";
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) { write_file_atomic(path, dump_config(cfg)); }

// --- initial data -------------------------------------------------------------------

InitialData preset_initial(const GridSpec& g, const std::string& preset, double amplitude, std::uint64_t seed,
                           double p0) {
  InitialData init{MacVectorField(g), TensorField(g, TensorLayout::kSymTraceless), ScalarField(g, p0)};
  if (preset == "zero") return init;
  if (preset == "smooth-modes") {
    const double pi = std::numbers::pi;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const double x = (i + 0.5) * g.hx() / g.lx;
        const double y = (j + 0.5) * g.hy() / g.ly;
        const std::size_t c = init.p0.index(i, j);
        init.q_in.comp(0)[c] = amplitude * std::sin(pi * x) * std::sin(pi * y);
        init.q_in.comp(1)[c] = amplitude * std::sin(2.0 * pi * x) * std::sin(pi * y);
      }
    }
    return init;
  }
  if (preset == "random-perturbation") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-amplitude, amplitude);
    for (int m = 0; m < init.q_in.comp_count(); ++m)
      for (double& v : init.q_in.comp(m).values()) v = uni(rng);
    return init;
  }
  throw ConfigError("initial.preset: unknown preset " + preset);
}

InitialData make_initial(const RunConfig& cfg) {
  const GridSpec& g = cfg.scheme.grid;
  if (cfg.initial.snapshot.empty()) {
    return preset_initial(g, cfg.initial.preset, cfg.initial.amplitude, cfg.initial.seed, cfg.initial.p0);
  }
  const Snapshot snap = read_snapshot(cfg.initial.snapshot);
  if (snap.nx != g.nx || snap.ny != g.ny) {
    throw ConfigError("initial.snapshot: grid " + std::to_string(snap.nx) + "x" + std::to_string(snap.ny) +
                      " does not match config grid");
  }
  InitialData init{MacVectorField(g), TensorField(g, TensorLayout::kSymTraceless), ScalarField(g, 0.0)};
  auto take = [&](const std::string& name, std::span<double> dst) {
    const SnapshotField* f = snap.find(name);
    if (!f) throw ConfigError("initial.snapshot: missing field " + name);
    std::copy(f->data.begin(), f->data.end(), dst.begin());
  };
  take("p", init.p0.values());
  if (snap.find("Q3")) {
    TensorField full(g, TensorLayout::kFull);
    for (int m = 0; m < 4; ++m) take("Q" + std::to_string(m), full.comp(m).values());
    init.q_in = to_layout(full, TensorLayout::kSymTraceless);
  } else {
    for (int m = 0; m < 2; ++m) take("Q" + std::to_string(m), init.q_in.comp(m).values());
  }
  const SnapshotField* u1 = snap.find("u1");
  const SnapshotField* u2 = snap.find("u2");
  if (!u1 || !u2) throw ConfigError("initial.snapshot: missing velocity fields");
  auto uv = init.u0.values();
  std::copy(u1->data.begin(), u1->data.end(), uv.begin());
  std::copy(u2->data.begin(), u2->data.end(), uv.begin() + static_cast<std::ptrdiff_t>(u1->data.size()));
  init.u0.enforce_constraints();
  return init;
}

// --- energy CSV ---------------------------------------------------------------------

const char* const kEnergyCsvHeader =
    "step,t,E_total,E_kin_tilde,E_kin,E_elastic,E_r,E_pterm,D_proj,D_u_incr,D_Q_incr,D_r_incr,D_visc,D_H,"
    "ledger_residual,div_u_norm,solver_iters";

std::string format_energy_csv(const std::vector<EnergyRow>& rows) {
  std::string out = kEnergyCsvHeader;
  out += "\n";
  for (const EnergyRow& r : rows) {
    out += std::to_string(r.step);
    for (double v : {r.t, r.E_total, r.E_kin_tilde, r.E_kin, r.E_elastic, r.E_r, r.E_pterm, r.D_proj, r.D_u_incr,
                     r.D_Q_incr, r.D_r_incr, r.D_visc, r.D_H, r.ledger_residual, r.div_u_norm}) {
      out += ",";
      out += fmt_double(v);
    }
    out += "," + std::to_string(r.solver_iters) + "\n";
  }
  return out;
}

void write_energy_csv(const std::vector<EnergyRow>& rows, const std::filesystem::path& path) {
  write_file_atomic(path, format_energy_csv(rows));
}

std::vector<EnergyRow> read_energy_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kEnergyCsvHeader) throw IoError(path.string() + ": unexpected CSV header");
  std::vector<EnergyRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 17) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 17 columns");
    EnergyRow r;
    try {
      r.step = std::stoi(cells[0]);
      double* dst[] = {&r.t,        &r.E_total,  &r.E_kin_tilde, &r.E_kin,    &r.E_elastic,
                       &r.E_r,      &r.E_pterm,  &r.D_proj,      &r.D_u_incr, &r.D_Q_incr,
                       &r.D_r_incr, &r.D_visc,   &r.D_H,         &r.ledger_residual, &r.div_u_norm};
      for (std::size_t k = 0; k < 15; ++k) *dst[k] = std::stod(cells[k + 1]);
      r.solver_iters = std::stoi(cells[16]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(r);
  }
  return rows;
}

// --- snapshots ----------------------------------------------------------------------

const SnapshotField* Snapshot::find(const std::string& name) const {
  for (const auto& f : fields)
    if (f.name == name) return &f;
  return nullptr;
}

std::size_t snapshot_field_length(const std::string& name, int nx, int ny) {
  if (name == "u1" || name == "ut1") return static_cast<std::size_t>(nx + 1) * ny;
  if (name == "u2" || name == "ut2") return static_cast<std::size_t>(nx) * (ny + 1);
  return static_cast<std::size_t>(nx) * ny;
}

Snapshot snapshot_of(const State& s) {
  const GridSpec& g = s.p.grid();
  Snapshot snap;
  snap.nx = g.nx;
  snap.ny = g.ny;
  snap.hx = g.hx();
  snap.hy = g.hy();
  snap.t = s.t;
  auto add = [&](const std::string& name, std::span<const double> v) {
    snap.fields.push_back(SnapshotField{name, std::vector<double>(v.begin(), v.end())});
  };
  add("p", s.p.values());
  add("r", s.r.values());
  for (int m = 0; m < s.Q.comp_count(); ++m) add("Q" + std::to_string(m), s.Q.comp(m).values());
  for (int m = 0; m < s.H.comp_count(); ++m) add("H" + std::to_string(m), s.H.comp(m).values());
  const auto u = s.u.values();
  const auto ut = s.u_tilde.values();
  const auto n1 = static_cast<std::ptrdiff_t>(s.u.u1_count());
  add("u1", u.first(static_cast<std::size_t>(n1)));
  add("u2", u.subspan(static_cast<std::size_t>(n1)));
  add("ut1", ut.first(static_cast<std::size_t>(n1)));
  add("ut2", ut.subspan(static_cast<std::size_t>(n1)));
  return snap;
}

void write_snapshot(const Snapshot& snap, const std::filesystem::path& path) {
  std::string out = "BEIEQ1 " + std::to_string(snap.nx) + " " + std::to_string(snap.ny) + " " + fmt_double(snap.hx) +
                    " " + fmt_double(snap.hy) + " " + fmt_double(snap.t) + "\n";
  for (const auto& f : snap.fields) {
    if (f.data.size() != snapshot_field_length(f.name, snap.nx, snap.ny)) {
      throw IoError(path.string() + ": field " + f.name + " has wrong length");
    }
    out += f.name + "\n";
    for (double v : f.data) write_le(out, v);
  }
  write_file_atomic(path, out);
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos) throw IoError(path.string() + ": missing header");
  Snapshot snap;
  {
    std::istringstream hs(bytes.substr(0, pos));
    std::string magic, shx, shy, st;
    if (!(hs >> magic >> snap.nx >> snap.ny >> shx >> shy >> st) || magic != "BEIEQ1") {
      throw IoError(path.string() + ": bad header");
    }
    snap.hx = std::strtod(shx.c_str(), nullptr);
    snap.hy = std::strtod(shy.c_str(), nullptr);
    snap.t = std::strtod(st.c_str(), nullptr);
  }
  ++pos;
  while (pos < bytes.size()) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) throw IoError(path.string() + ": truncated field name");
    SnapshotField f;
    f.name = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    const std::size_t len = snapshot_field_length(f.name, snap.nx, snap.ny);
    if (pos + 8 * len > bytes.size()) throw IoError(path.string() + ": truncated field " + f.name);
    f.data.resize(len);
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t k = 0; k < len; ++k) f.data[k] = read_le(raw + 8 * k);
    pos += 8 * len;
    snap.fields.push_back(std::move(f));
  }
  return snap;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// --- logging ------------------------------------------------------------------------

LogLevel log_level() {
  const char* env = std::getenv("BEIEQ_LOG");
  if (!env) return LogLevel::kInfo;
  if (std::strcmp(env, "quiet") == 0) return LogLevel::kQuiet;
  if (std::strcmp(env, "debug") == 0) return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "[beieq] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "[beieq:debug] " << msg << "\n";
}

}  // namespace beieq
