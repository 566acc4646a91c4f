#include <cstdlib>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "gcinfer/gclib.hpp"
#include "json.hpp"

using namespace gcinfer;

namespace {

struct Entry {
  const char* name;
  std::function<ComponentHandle()> build;
  int64_t target_xor, target_nonxor;  // published synthesis counts, -1 when none
};

std::vector<Entry> entries() {
  auto act = [](ActFn f, ActVariant v) {
    return [f, v] { return f == ActFn::Tanh ? build_tanh(v) : build_sigmoid(v); };
  };
  return {
      {"add16", [] { return build_add(16); }, 16, 16},
      {"sub16", [] { return build_sub(16); }, -1, -1},
      {"cmp16", [] { return build_cmp(16); }, -1, -1},
      {"mux1", [] { return build_mux(1); }, -1, 1},
      {"mux16", [] { return build_mux(16); }, -1, -1},
      {"relu", [] { return build_relu(); }, 30, 15},
      {"mult", [] { return build_mult_truncated(); }, 381, 212},
      {"div", [] { return build_div(); }, 545, 361},
      {"tanh_lut", act(ActFn::Tanh, ActVariant::LUT), 692, 149745},
      {"tanh_reduced", act(ActFn::Tanh, ActVariant::Reduced), 3040, 1746},
      {"tanh_pl", act(ActFn::Tanh, ActVariant::PiecewiseLinear), 5, 206},
      {"tanh_cordic", act(ActFn::Tanh, ActVariant::CORDIC), 8415, 3900},
      {"sigmoid_lut", act(ActFn::Sigmoid, ActVariant::LUT), 553, 142523},
      {"sigmoid_reduced", act(ActFn::Sigmoid, ActVariant::Reduced), 3629, 2107},
      {"sigmoid_plan", act(ActFn::Sigmoid, ActVariant::PiecewiseLinear), 1, 73},
      {"sigmoid_cordic", act(ActFn::Sigmoid, ActVariant::CORDIC), 8447, 3932},
      {"cordic_core", [] { return build_cordic_hyperbolic(); }, -1, -1},
      {"argmax2", [] { return build_argmax(2); }, 48, 32},
      {"argmax10", [] { return build_argmax(10); }, 9 * 48, 9 * 32},
      {"argmax26", [] { return build_argmax(26); }, 25 * 48, 25 * 32},
      {"matvec_4x3", [] { return build_matvec(4, 3); }, 397 * 12 - 16 * 3, 228 * 12 - 16 * 3},
  };
}

nlohmann::json measure() {
  nlohmann::json j;
  for (const auto& e : entries()) {
    auto h = e.build();
    auto s = stats(h.netlist);
    nlohmann::json r = {{"xor", s.xor_count}, {"nonxor", s.nonxor_count}};
    if (e.target_nonxor >= 0) {
      r["target_nonxor"] = e.target_nonxor;
      r["within_15pct"] = double(s.nonxor_count) <= 1.15 * double(e.target_nonxor);
    }
    if (e.target_xor >= 0) r["target_xor"] = e.target_xor;
    j[e.name] = r;
  }
  return j;
}

}  // namespace

TEST_CASE("component gate counts equal the frozen regression file") {
  const std::string path = std::string(GCINFER_SOURCE_DIR) + "/regression/gate_counts.json";
  auto now = measure();
  const char* upd = std::getenv("GCINFER_UPDATE_REGRESSION");
  if (upd && std::string(upd) == "1") {
    std::ofstream(path) << now.dump(2) << "\n";
    MESSAGE("rewrote " << path);
    return;
  }
  std::ifstream f(path);
  REQUIRE_MESSAGE(f.good(), "missing " << path << "; run with GCINFER_UPDATE_REGRESSION=1");
  auto frozen = nlohmann::json::parse(f);
  for (auto& [name, r] : now.items()) {
    INFO(name);
    REQUIRE(frozen.contains(name));
    CHECK(frozen[name]["xor"] == r["xor"]);
    CHECK(frozen[name]["nonxor"] == r["nonxor"]);
  }
  CHECK(frozen.size() == now.size());
}
