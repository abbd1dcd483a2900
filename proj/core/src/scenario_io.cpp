#include "irsfd/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace irsfd {

using nlohmann::json;

double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

namespace {

// Written values are rounded to 1e-9 dB so that a dB -> linear -> dB cycle
// prints the number the file started with.
double round_db(double db) { return std::round(db * 1e9) / 1e9; }
double linear_to_db(double x) { return round_db(10.0 * std::log10(x)); }
double watts_to_dbm(double w) { return round_db(10.0 * std::log10(w) + 30.0); }

// Users sit on the near (UL) and far (DL) edge of a 20 m square centred at
// (0, 80, 0); two users per edge land exactly on the corners.
std::vector<Point3> edge_positions(int count, double y) {
  std::vector<Point3> out;
  for (int i = 0; i < count; ++i) {
    const double x = count == 1 ? -10.0 : -10.0 + 20.0 * i / (count - 1);
    out.push_back({x, y, 0.0});
  }
  return out;
}

template <typename T>
void check_size(const std::vector<T>& v, int n, const char* what) {
  if (static_cast<int>(v.size()) != n) throw InvalidArgument(std::string("scenario: wrong length of ") + what);
}

}  // namespace

CVec PhaseVector::reflection() const {
  CVec phi(theta.size());
  for (Eigen::Index n = 0; n < theta.size(); ++n) phi(n) = std::polar(1.0, theta(n));
  return phi;
}

void ScenarioConfig::validate() const {
  if (num_ul < 1 || num_dl < 1 || nt < 1 || nr < 1 || irs_elements < 1)
    throw InvalidArgument("scenario: K, L, Nt, Nr and T must be at least 1");
  check_size(ul_antennas, num_ul, "ul_antennas");
  check_size(ul_streams, num_ul, "ul_streams");
  check_size(dl_antennas, num_dl, "dl_antennas");
  check_size(dl_streams, num_dl, "dl_streams");
  check_size(ul_positions, num_ul, "ul_positions");
  check_size(dl_positions, num_dl, "dl_positions");
  check_size(dl_noise, num_dl, "dl_noise");
  check_size(ul_power, num_ul, "ul_power");
  check_size(ul_weights, num_ul, "ul_weights");
  check_size(dl_weights, num_dl, "dl_weights");
  for (int k = 0; k < num_ul; ++k) {
    if (ul_streams[k] < 1 || ul_streams[k] > ul_antennas[k])
      throw InvalidArgument("scenario: need 1 <= D_U <= M_U");
    if (!(ul_power[k] > 0.0) || !(ul_weights[k] > 0.0))
      throw InvalidArgument("scenario: UL power and weight must be positive");
  }
  for (int l = 0; l < num_dl; ++l) {
    if (dl_streams[l] < 1 || dl_streams[l] > dl_antennas[l])
      throw InvalidArgument("scenario: need 1 <= D_D <= M_D");
    if (!(dl_noise[l] > 0.0) || !(dl_weights[l] > 0.0))
      throw InvalidArgument("scenario: DL noise and weight must be positive");
  }
  if (!(ul_noise > 0.0) || !(ap_power > 0.0) || !(si_power > 0.0) || !(ref_gain > 0.0) ||
      !(ref_distance > 0.0))
    throw InvalidArgument("scenario: noise, powers and reference gain must be positive");
  if (location_radius < 0.0 || doppler_hz < 0.0) throw InvalidArgument("scenario: negative radius or Doppler");
  for (double b : {rician_factor.ap_irs, rician_factor.ap_user, rician_factor.irs_user, rician_factor.user_user})
    if (b < 0.0) throw InvalidArgument("scenario: negative Rician factor");
}

ScenarioConfig make_scenario(int k, int l, int n, int m, int d, int t) {
  ScenarioConfig cfg;
  cfg.num_ul = k;
  cfg.num_dl = l;
  cfg.nt = n;
  cfg.nr = n;
  cfg.irs_elements = t;
  cfg.ul_antennas.assign(k, m);
  cfg.dl_antennas.assign(l, m);
  cfg.ul_streams.assign(k, d);
  cfg.dl_streams.assign(l, d);
  cfg.ul_positions = edge_positions(k, 70.0);
  cfg.dl_positions = edge_positions(l, 90.0);
  cfg.ul_noise = dbm_to_watts(-76.0);
  cfg.dl_noise.assign(l, dbm_to_watts(-76.0));
  cfg.si_power = db_to_linear(-60.0);
  cfg.ul_power.assign(k, dbm_to_watts(24.0));
  cfg.ap_power = dbm_to_watts(44.0);
  cfg.ul_weights.assign(k, 1.0);
  cfg.dl_weights.assign(l, 1.0);
  cfg.ref_gain = db_to_linear(-30.0);
  cfg.ref_distance = 1.0;
  cfg.rician_factor = {db_to_linear(3.0), db_to_linear(-3.0), db_to_linear(3.0), db_to_linear(0.0)};
  return cfg;
}

ScenarioConfig full_scenario() { return make_scenario(2, 2, 32, 4, 4, 200); }

ScenarioConfig desk_scenario() { return make_scenario(2, 2, 8, 2, 2, 16); }

namespace {

Point3 point_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("scenario: positions are [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json point_to(const Point3& p) { return json::array({p.x, p.y, p.z}); }

// Accepts either a scalar (broadcast to n entries) or an array of length n.
template <typename T>
std::vector<T> per_user(const json& j, int n) {
  if (j.is_array()) {
    auto v = j.get<std::vector<T>>();
    if (static_cast<int>(v.size()) != n) throw InvalidArgument("scenario: per-user array has wrong length");
    return v;
  }
  return std::vector<T>(n, j.get<T>());
}

template <typename F>
std::vector<double> mapped(const std::vector<double>& v, F f) {
  std::vector<double> out;
  for (double x : v) out.push_back(f(x));
  return out;
}

void read_links(const json& j, LinkParams& p, bool in_db) {
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = in_db ? db_to_linear(j[key].get<double>()) : j[key].get<double>();
  };
  get("ap_irs", p.ap_irs);
  get("ap_user", p.ap_user);
  get("irs_user", p.irs_user);
  get("user_user", p.user_user);
}

json write_links(const LinkParams& p, bool in_db) {
  auto f = [&](double x) { return in_db ? linear_to_db(x) : x; };
  return {{"ap_irs", f(p.ap_irs)}, {"ap_user", f(p.ap_user)}, {"irs_user", f(p.irs_user)},
          {"user_user", f(p.user_user)}};
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("scenario: malformed JSON: ") + e.what());
  }
  try {
    const std::string base = root.value("base", std::string("desk"));
    const json users = root.value("users", json::object());
    const json ap = root.value("ap", json::object());
    const json irs = root.value("irs", json::object());

    ScenarioConfig start = base == "full" ? full_scenario() : desk_scenario();
    if (base != "full" && base != "desk") throw InvalidArgument("scenario: base must be 'desk' or 'full'");

    const int k = users.value("ul", start.num_ul);
    const int l = users.value("dl", start.num_dl);
    const int n = ap.value("antennas", start.nt);
    const int t = irs.value("elements", start.irs_elements);
    const int m = start.ul_antennas.front();
    const int d = start.ul_streams.front();
    ScenarioConfig cfg = make_scenario(k, l, n, m, d, t);
    cfg.nt = ap.value("nt", n);
    cfg.nr = ap.value("nr", n);
    if (users.contains("ul_antennas")) cfg.ul_antennas = per_user<int>(users["ul_antennas"], k);
    if (users.contains("dl_antennas")) cfg.dl_antennas = per_user<int>(users["dl_antennas"], l);
    if (users.contains("ul_streams")) cfg.ul_streams = per_user<int>(users["ul_streams"], k);
    if (users.contains("dl_streams")) cfg.dl_streams = per_user<int>(users["dl_streams"], l);

    if (ap.contains("position")) cfg.ap_position = point_from(ap["position"]);
    if (irs.contains("position")) cfg.irs_position = point_from(irs["position"]);

    if (root.contains("geometry")) {
      const json& g = root["geometry"];
      if (g.contains("ul_positions")) {
        cfg.ul_positions.clear();
        for (const auto& p : g["ul_positions"]) cfg.ul_positions.push_back(point_from(p));
      }
      if (g.contains("dl_positions")) {
        cfg.dl_positions.clear();
        for (const auto& p : g["dl_positions"]) cfg.dl_positions.push_back(point_from(p));
      }
      cfg.location_radius = g.value("location_radius", cfg.location_radius);
    }
    if (root.contains("channel")) {
      const json& c = root["channel"];
      if (c.contains("path_loss_exponent")) read_links(c["path_loss_exponent"], cfg.path_loss_exponent, false);
      if (c.contains("rician_factor_db")) read_links(c["rician_factor_db"], cfg.rician_factor, true);
      if (c.contains("ref_gain_db")) cfg.ref_gain = db_to_linear(c["ref_gain_db"].get<double>());
      cfg.ref_distance = c.value("ref_distance", cfg.ref_distance);
      if (c.contains("si_power_db")) cfg.si_power = db_to_linear(c["si_power_db"].get<double>());
      cfg.doppler_hz = c.value("doppler_hz", cfg.doppler_hz);
    }
    if (root.contains("noise")) {
      const json& nz = root["noise"];
      if (nz.contains("ul_dbm")) cfg.ul_noise = dbm_to_watts(nz["ul_dbm"].get<double>());
      if (nz.contains("dl_dbm")) cfg.dl_noise = mapped(per_user<double>(nz["dl_dbm"], l), dbm_to_watts);
    }
    if (root.contains("power")) {
      const json& pw = root["power"];
      if (pw.contains("ul_dbm")) cfg.ul_power = mapped(per_user<double>(pw["ul_dbm"], k), dbm_to_watts);
      if (pw.contains("ap_dbm")) cfg.ap_power = dbm_to_watts(pw["ap_dbm"].get<double>());
    }
    if (root.contains("weights")) {
      const json& w = root["weights"];
      if (w.contains("ul")) cfg.ul_weights = per_user<double>(w["ul"], k);
      if (w.contains("dl")) cfg.dl_weights = per_user<double>(w["dl"], l);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("scenario: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("scenario: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json root;
  root["base"] = "desk";
  root["users"] = {{"ul", cfg.num_ul},
                   {"dl", cfg.num_dl},
                   {"ul_antennas", cfg.ul_antennas},
                   {"dl_antennas", cfg.dl_antennas},
                   {"ul_streams", cfg.ul_streams},
                   {"dl_streams", cfg.dl_streams}};
  root["ap"] = {{"nt", cfg.nt}, {"nr", cfg.nr}, {"position", point_to(cfg.ap_position)}};
  root["irs"] = {{"elements", cfg.irs_elements}, {"position", point_to(cfg.irs_position)}};
  json ul = json::array(), dl = json::array();
  for (const auto& p : cfg.ul_positions) ul.push_back(point_to(p));
  for (const auto& p : cfg.dl_positions) dl.push_back(point_to(p));
  root["geometry"] = {{"ul_positions", ul}, {"dl_positions", dl}, {"location_radius", cfg.location_radius}};
  root["channel"] = {{"path_loss_exponent", write_links(cfg.path_loss_exponent, false)},
                     {"rician_factor_db", write_links(cfg.rician_factor, true)},
                     {"ref_gain_db", linear_to_db(cfg.ref_gain)},
                     {"ref_distance", cfg.ref_distance},
                     {"si_power_db", linear_to_db(cfg.si_power)},
                     {"doppler_hz", cfg.doppler_hz}};
  root["noise"] = {{"ul_dbm", watts_to_dbm(cfg.ul_noise)}, {"dl_dbm", mapped(cfg.dl_noise, watts_to_dbm)}};
  root["power"] = {{"ul_dbm", mapped(cfg.ul_power, watts_to_dbm)}, {"ap_dbm", watts_to_dbm(cfg.ap_power)}};
  root["weights"] = {{"ul", cfg.ul_weights}, {"dl", cfg.dl_weights}};
  return root.dump(2);
}

}  // namespace irsfd
