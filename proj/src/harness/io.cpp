#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "pdhams/error.hpp"
#include "pdhams/harness.hpp"

namespace pdhams {

namespace fs = std::filesystem;

std::string format_double(double x) {
  // Shortest representation that parses back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "metric,detail,n_draws,value\n";
  for (const auto& r : rows) {
    out += r.metric + ',' + r.detail + ',' + std::to_string(r.n_draws) + ',' +
           (r.value ? format_double(*r.value) : std::string("undefined")) + '\n';
  }
  return out;
}

std::string coords_label(const std::vector<std::size_t>& coords) {
  std::string s;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(coords[i] + 1);
  }
  return s;
}

std::string tv_csv(const std::vector<TvRow>& rows) {
  std::string out = "metric,coords,n_draws,mean,sd\n";
  for (const auto& r : rows) {
    out += "tv_dim" + std::to_string(r.coords.size()) + ',' + coords_label(r.coords) + ',' +
           std::to_string(r.n_draws) + ',' + format_double(r.mean) + ',' + format_double(r.sd) + '\n';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(std::string_view s, std::size_t line) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("chains.csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return x;
}

long long parse_int(std::string_view s, std::size_t line) {
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("chains.csv line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return x;
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) { write_text(path, metrics_csv(rows)); }

void write_tv_csv(const fs::path& path, const std::vector<TvRow>& rows) { write_text(path, tv_csv(rows)); }

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string chain_csv_header(std::size_t d) {
  std::string h = "chain,t";
  for (std::size_t i = 1; i <= d; ++i) h += ",s_" + std::to_string(i);
  return h + ",energy,accepted\n";
}

std::string chain_csv_rows(const ChainRecord& rec, const LatticeSpec& lattice, const ChainRecord* burn_in) {
  std::string out;
  const std::string prefix = std::to_string(rec.chain) + ',';
  auto emit = [&](const ChainRecord& r, std::size_t t, long long label) {
    out += prefix;
    out += std::to_string(label);
    for (std::size_t i = 0; i < r.d; ++i) {
      out += ',';
      out += format_double(lattice.value(r.at(t, i)));
    }
    out += ',';
    out += format_double(r.energies[t]);
    out += r.accepted[t] ? ",1\n" : ",0\n";
  };
  if (burn_in) {
    const auto B = static_cast<long long>(burn_in->T());
    for (std::size_t t = 0; t < burn_in->T(); ++t) emit(*burn_in, t, static_cast<long long>(t) - B);
  }
  for (std::size_t t = 0; t < rec.T(); ++t) emit(rec, t, static_cast<long long>(t));
  return out;
}

std::vector<ChainRecord> read_chains_csv(const fs::path& path, const LatticeSpec& lattice, bool include_burn_in) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  const std::size_t d = lattice.dim();
  std::string line;
  if (!std::getline(in, line) || line + '\n' != chain_csv_header(d))
    throw ConfigError(path.string() + ": header does not match a " + std::to_string(d) + "-dimensional lattice");

  std::map<std::size_t, ChainRecord> by_chain;
  std::vector<std::string_view> cells;
  IndexPoint idx(d);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    cells.clear();
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != d + 4) throw ConfigError("chains.csv line " + std::to_string(lineno) + ": wrong field count");
    const auto chain = static_cast<std::size_t>(parse_int(cells[0], lineno));
    const long long t = parse_int(cells[1], lineno);
    if (t < 0 && !include_burn_in) continue;
    for (std::size_t i = 0; i < d; ++i)
      idx[i] = static_cast<std::uint16_t>(lattice.index_of(parse_double(cells[2 + i], lineno)));
    const double energy = parse_double(cells[2 + d], lineno);
    const long long acc = parse_int(cells[3 + d], lineno);
    ChainRecord& rec = by_chain[chain];
    if (rec.d == 0) {
      rec.chain = chain;
      rec.d = d;
    }
    rec.push(idx, energy, acc != 0);
  }
  std::vector<ChainRecord> out;
  out.reserve(by_chain.size());
  for (auto& [_, rec] : by_chain) out.push_back(std::move(rec));
  return out;
}

bool recompute_metrics(const fs::path& dir, bool check, std::vector<std::string>* warnings) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  const ExperimentConfig cfg = config_from_json(manifest.at("config"));
  const auto target = build_target(cfg.target);
  if (!fs::exists(dir / "chains.csv")) throw ConfigError("run directory has no chains.csv (write_chains was off)");
  std::vector<ChainRecord> records = read_chains_csv(dir / "chains.csv", target->lattice());
  if (records.size() != cfg.chains) throw ConfigError("chains.csv chain count disagrees with the manifest");
  for (const auto& r : records) {
    if (r.T() != cfg.kept()) throw ConfigError("chains.csv draw count disagrees with the manifest");
  }
  const MetricsOutput m = compute_metrics(cfg, *target, records);
  if (warnings) *warnings = m.warnings;
  const std::string mcsv = metrics_csv(m.rows);
  const std::string tcsv = tv_csv(m.tv);
  if (!check) {
    write_text(dir / "metrics.csv", mcsv);
    write_text(dir / "tv.csv", tcsv);
    return true;
  }
  return read_text(dir / "metrics.csv") == mcsv && read_text(dir / "tv.csv") == tcsv;
}

}  // namespace pdhams
