// gcinfer command-line front end.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "gcinfer/compile.hpp"
#include "gcinfer/costmodel.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/garble.hpp"
#include "gcinfer/ot.hpp"
#include "gcinfer/preprocess.hpp"
#include "gcinfer/selftest.hpp"
#include "gcinfer/session.hpp"
#include "json.hpp"

using namespace gcinfer;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kProtocol = 2, kValidation = 3 };

struct Globals {
  std::string log_level = "warn";
  uint64_t seed = 0;
  std::string ot_mode = "secure";
  bool json = false;
};

int exit_code(Errc e) {
  switch (e) {
    case Errc::ChannelError:
    case Errc::BatchSizeMismatch:
    case Errc::GroupElementInvalid:
    case Errc::DigestMismatch:
    case Errc::ProtocolViolation:
    case Errc::ShareSizeMismatch:
    case Errc::MalformedTables:
    case Errc::InvalidLabel:
      return kProtocol;
    case Errc::InvalidArgument: return kUsage;
    default: return kValidation;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path);
  f << text << "\n";
}

// [1.5, -0.25, ...], {"x": [...]} or {"raw": [int16, ...]}
FxVec read_input(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
  if (j.is_object() && j.contains("raw")) {
    FxVec v;
    for (const auto& r : j["raw"]) v.push_back(from_raw(r.get<int64_t>()));
    return v;
  }
  const json& a = j.is_object() ? j.at("x") : j;
  if (!a.is_array()) throw Error(Errc::ParseError, path + ": expected an array of numbers");
  return encode_all(a.get<std::vector<double>>());
}

void print(const Globals& g, const json& j, const std::string& human) {
  if (g.json) std::cout << j.dump() << "\n";
  else std::cout << human << "\n";
}

SessionOptions session_options(const Globals& g) {
  SessionOptions o;
  o.ot_mode = parse_ot_mode(g.ot_mode);
  o.seed = g.seed;
  return o;
}

json stats_json(const SessionStats& s) {
  return {{"cycles", s.cycles},
          {"table_bytes", s.table_bytes},
          {"label_bytes", s.label_bytes},
          {"ot_bytes", s.ot_bytes},
          {"frames_sent", s.frames_sent},
          {"frames_received", s.frames_received},
          {"seconds", s.seconds}};
}

CompiledCircuit load_checked(const std::string& netlist, const ModelDescriptor* m) {
  auto c = load_compiled(netlist);
  if (m && model_digest(*m, c.mode, c.outsourced) != c.digest)
    throw Error(Errc::DigestMismatch, "model does not match the netlist it is served with");
  return c;
}

std::vector<uint32_t> parse_topology(const std::string& s) {
  std::vector<uint32_t> t;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ','))
    try {
      t.push_back(uint32_t(std::stoul(tok)));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad topology '" + s + "'");
    }
  if (t.size() < 2) throw Error(Errc::InvalidArgument, "topology needs at least two sizes");
  return t;
}

// ---------------------------------------------------------------- commands

int cmd_compile(const Globals& g, const std::string& model, const std::string& mode, bool outsourced,
                const std::string& out, const std::string& stats_path) {
  auto m = load_model(model);
  auto md = parse_compile_mode(mode);
  GateStats st;
  uint64_t cycles = 1, stages = 1;
  std::string digest = model_digest(m, md, outsourced);
  if (out.empty() && md == CompileMode::Unrolled) {
    st = compile_stats(m, md, outsourced);
  } else {
    auto c = compile(m, md, outsourced);
    st = stats(c.program);
    cycles = c.program.total_cycles();
    stages = c.program.stages.size();
    if (!out.empty()) save_compiled(c, out);
  }
  json j = {{"model", m.name},
            {"mode", to_string(md)},
            {"outsourced", outsourced},
            {"xor_count", st.xor_count},
            {"nonxor_count", st.nonxor_count},
            {"comm_bytes", st.nonxor_count * 32},
            {"cycles", cycles},
            {"stages", stages},
            {"digest", digest}};
  if (!stats_path.empty()) write_text(stats_path, j.dump(2));
  if (stats_path != "-")
    print(g, j,
          "xor " + std::to_string(st.xor_count) + "  non-xor " + std::to_string(st.nonxor_count) + "  cycles " +
              std::to_string(cycles) + (out.empty() ? "" : "  -> " + out));
  return kOk;
}

int cmd_stats(const Globals& g, const std::string& netlist) {
  auto c = load_compiled(netlist);
  auto st = stats(c.program);
  json j = {{"mode", to_string(c.mode)},
            {"outsourced", c.outsourced},
            {"xor_count", st.xor_count},
            {"nonxor_count", st.nonxor_count},
            {"comm_bytes", st.nonxor_count * 32},
            {"cycles", c.program.total_cycles()},
            {"stages", c.program.stages.size()},
            {"garbler_inputs", c.garbler_map.size()},
            {"evaluator_inputs", c.evaluator_map.size()},
            {"outputs", c.output_map.size()},
            {"digest", c.digest}};
  print(g, j,
        "xor " + std::to_string(st.xor_count) + "  non-xor " + std::to_string(st.nonxor_count) + "  cycles " +
            std::to_string(c.program.total_cycles()) + "  stages " + std::to_string(c.program.stages.size()));
  return kOk;
}

struct EstimateArgs {
  std::string netlist, model, mode, published;
  bool analytic = false;
  CostParams p;
  double bw = 0;
};

int cmd_estimate(const Globals& g, EstimateArgs a) {
  if (a.bw > 0) a.p.bw_net = a.bw;
  CostReport r;
  json src;
  if (!a.published.empty()) {
    const PublishedBenchmark* b = nullptr;
    for (const auto& x : published_benchmarks())
      if (x.name == a.published) b = &x;
    if (!b) throw Error(Errc::InvalidArgument, "unknown benchmark " + a.published);
    r = estimate({b->xor_count, b->nonxor_count}, a.p);
    src = {{"kind", "published"}, {"name", b->name}};
  } else if (a.analytic) {
    if (a.model.empty()) throw Error(Errc::InvalidArgument, "--analytic needs --model");
    CompileMode md = CompileMode::Unrolled;
    if (!a.mode.empty()) md = parse_compile_mode(a.mode);
    else if (!a.netlist.empty()) md = load_compiled(a.netlist).mode;
    r = estimate_model(load_model(a.model), md, true, a.p);
    src = {{"kind", "analytic"}, {"model", a.model}, {"mode", to_string(md)}};
  } else if (!a.netlist.empty()) {
    auto c = load_compiled(a.netlist);
    r = estimate(stats(c.program), a.p);
    src = {{"kind", "netlist"}, {"netlist", a.netlist}, {"mode", to_string(c.mode)}};
  } else if (!a.model.empty()) {
    auto md = a.mode.empty() ? CompileMode::Unrolled : parse_compile_mode(a.mode);
    r = estimate_model(load_model(a.model), md, false, a.p);
    src = {{"kind", "compiled"}, {"model", a.model}, {"mode", to_string(md)}};
  } else {
    throw Error(Errc::InvalidArgument, "estimate needs --netlist, --model or --published");
  }
  json j = json::parse(cost_report_json(r, a.p));
  j["source"] = src;
  std::ostringstream h;
  h << "xor " << r.xor_count << "  non-xor " << r.nonxor_count << "\n"
    << "t_comp " << r.t_comp << " s  comm " << double(r.comm_bytes) / 1e6 << " MB";
  if (r.t_comm) h << "  t_comm " << *r.t_comm << " s";
  print(g, j, h.str());
  return kOk;
}

struct PreprocessArgs {
  std::string train, labels, out, model, model_out;
  double gamma = 0.3, lr = 0.05, val_fraction = 0.2;
  size_t patience = 0, batch = 32;
};

int cmd_preprocess(const Globals& g, const PreprocessArgs& a) {
  Eigen::MatrixXd A = read_csv_samples(a.train);
  auto y = read_csv_labels(a.labels);
  if (y.size() != size_t(A.cols()))
    throw Error(Errc::DimMismatch,
                std::to_string(A.cols()) + " samples but " + std::to_string(y.size()) + " labels");
  ProjectionConfig cfg;
  cfg.gamma = a.gamma;
  cfg.n_batch = a.batch;
  if (a.patience) cfg.patience = a.patience;
  std::unique_ptr<MlpTrainer> trainer;
  ModelDescriptor like;
  Eigen::MatrixXd Atrain = A;
  std::vector<int> ytrain = y;
  if (!a.model.empty()) {
    like = load_model(a.model);
    size_t nv = size_t(double(A.cols()) * a.val_fraction);
    if (nv == 0 || nv >= size_t(A.cols())) throw Error(Errc::InvalidArgument, "validation split leaves no data");
    size_t nt = A.cols() - nv;
    Atrain = A.leftCols(nt);
    ytrain.assign(y.begin(), y.begin() + nt);
    trainer = std::make_unique<MlpTrainer>(mlp_from_model(like), A.rightCols(nv),
                                           std::vector<int>(y.begin() + nt, y.end()), a.lr, 1, g.seed ? g.seed : 1);
  }
  auto p = build_projection(Atrain, ytrain, cfg, trainer.get());
  auto rep = verify_projector(p.W, p.D);
  write_text(a.out, projection_to_json(p, cfg));
  json j = {{"m", A.rows()},
            {"samples", Atrain.cols()},
            {"l", p.l},
            {"epsilon", p.epsilon},
            {"skipped", p.skipped},
            {"trainer_calls", p.deltas.size()},
            {"final_delta", p.deltas.empty() ? json(nullptr) : json(p.deltas.back())},
            {"projector_ok", rep.ok()},
            {"out", a.out}};
  if (trainer && !a.model_out.empty()) {
    save_model(mlp_to_model(trainer->net(), like), a.model_out);
    j["model_out"] = a.model_out;
  }
  print(g, j,
        "l " + std::to_string(p.l) + "  epsilon " + std::to_string(p.epsilon) + "  projector " +
            (rep.ok() ? "ok" : "FAILED") + "  -> " + a.out);
  return rep.ok() ? kOk : kValidation;
}

struct PruneArgs {
  std::string model, out, train, labels;
  double fraction = -1, threshold = -1, lr = 0.05;
  size_t epochs = 0, batch = 32;
};

int cmd_prune(const Globals& g, const PruneArgs& a) {
  if ((a.fraction < 0) == (a.threshold < 0)) throw Error(Errc::InvalidArgument, "give one of --fraction, --threshold");
  if (a.epochs && (a.train.empty() || a.labels.empty()))
    throw Error(Errc::InvalidArgument, "retraining needs --train and --labels");
  auto m = load_model(a.model);
  auto pr = a.fraction >= 0 ? magnitude_prune_fraction(m, a.fraction) : magnitude_prune_threshold(m, a.threshold);
  ModelDescriptor out = pr.model;
  json j;
  if (a.epochs) {
    Eigen::MatrixXd X = read_csv_samples(a.train);
    auto y = read_csv_labels(a.labels);
    if (y.size() != size_t(X.cols())) throw Error(Errc::DimMismatch, "sample and label counts differ");
    j["error_dense"] = fixed_error_rate(m, X, y);
    j["error_pruned"] = fixed_error_rate(pr.model, X, y);
    auto net = mlp_from_model(pr.model);
    std::mt19937_64 rng(g.seed ? g.seed : 1);
    for (size_t e = 0; e < a.epochs; ++e) mlp_train_epoch(net, X, y, a.lr, a.batch, rng);
    out = mlp_to_model(net, pr.model);
    j["error_retrained"] = fixed_error_rate(out, X, y);
  }
  save_model(out, a.out);
  uint64_t masked = 0, kept = 0;
  for (const auto& mk : pr.masks)
    for (auto v : mk) (v ? kept : masked)++;
  auto before = analytic_stats(m, CompileMode::Unrolled), after = analytic_stats(out, CompileMode::Unrolled);
  j["masked"] = masked;
  j["kept"] = kept;
  j["nonxor_before"] = before.nonxor_count;
  j["nonxor_after"] = after.nonxor_count;
  j["epochs"] = a.epochs;
  j["out"] = a.out;
  print(g, j,
        "masked " + std::to_string(masked) + " of " + std::to_string(masked + kept) + "  non-xor " +
            std::to_string(before.nonxor_count) + " -> " + std::to_string(after.nonxor_count) + "  -> " + a.out);
  return kOk;
}

int cmd_serve(const Globals& g, const std::string& model, const std::string& netlist, const std::string& listen,
              size_t sessions) {
  auto m = load_model(model);
  auto c = load_checked(netlist, &m);
  auto o = session_options(g);
  TcpListener l(listen);
  spdlog::info("listening on port {}", l.port());
  if (!g.json) std::cerr << "listening on port " << l.port() << std::endl;
  int rc = kOk;
  for (size_t n = 0; sessions == 0 || n < sessions; ++n) {
    SessionStats st;
    try {
      serve_one(m, c, l, o, &st);
      json j = stats_json(st);
      j["session"] = n;
      j["ok"] = true;
      print(g, j, "session " + std::to_string(n) + " done, " + std::to_string(st.table_bytes) + " table bytes");
    } catch (const Error& e) {
      spdlog::error("session {}: {}", n, e.what());
      if (g.json) std::cout << json{{"session", n}, {"ok", false}, {"error", e.what()}}.dump() << "\n";
      rc = exit_code(e.code());
    }
    std::cout.flush();
  }
  return rc;
}

int cmd_infer(const Globals& g, const std::string& input, const std::string& netlist, const std::string& connect,
              bool outsource, const std::string& proxy, int timeout_ms) {
  auto x = read_input(input);
  auto c = load_compiled(netlist);
  auto o = session_options(g);
  auto to = std::chrono::milliseconds(timeout_ms);
  size_t label;
  json j;
  if (outsource) {
    if (proxy.empty()) throw Error(Errc::InvalidArgument, "--outsource needs --proxy");
    auto pch = tcp_connect(proxy, to);
    auto sch = tcp_connect(connect, to);
    std::function<uint64_t()> rng;
    std::shared_ptr<std::mt19937_64> gen;
    if (g.seed) {
      gen = std::make_shared<std::mt19937_64>(g.seed);
      rng = [gen] { return (*gen)(); };
    }
    label = run_outsourced(x, c, *pch, *sch, o, rng);
    j = {{"label", label}, {"outsourced", true}};
  } else {
    auto sch = tcp_connect(connect, to);
    SessionStats st;
    label = run_client(x, c, *sch, o, &st);
    j = stats_json(st);
    j["label"] = label;
    j["outsourced"] = false;
  }
  print(g, j, std::to_string(label));
  return kOk;
}

int cmd_proxy(const Globals& g, const std::string& netlist, const std::string& listen, const std::string& connect,
              size_t sessions, int timeout_ms) {
  auto c = load_compiled(netlist);
  auto o = session_options(g);
  TcpListener l(listen);
  if (!g.json) std::cerr << "listening on port " << l.port() << std::endl;
  int rc = kOk;
  for (size_t n = 0; sessions == 0 || n < sessions; ++n) {
    try {
      auto client = l.accept();
      auto server = tcp_connect(connect, std::chrono::milliseconds(timeout_ms));
      SessionStats st;
      run_proxy(c, *client, *server, o, &st);
      json j = stats_json(st);
      j["session"] = n;
      j["ok"] = true;
      print(g, j, "session " + std::to_string(n) + " done");
    } catch (const Error& e) {
      spdlog::error("proxy session {}: {}", n, e.what());
      if (g.json) std::cout << json{{"session", n}, {"ok", false}, {"error", e.what()}}.dump() << "\n";
      rc = exit_code(e.code());
    }
    std::cout.flush();
  }
  return rc;
}

int cmd_selftest(const Globals& g, size_t trials) {
  auto res = run_selftest(g.seed ? g.seed : 1, trials, [&](const SelftestResult& r) {
    if (!g.json) std::cout << (r.ok ? "ok    " : "FAIL  ") << r.name << (r.detail.empty() ? "" : "  " + r.detail)
                           << std::endl;
  });
  size_t failed = 0;
  json cases = json::array();
  for (const auto& r : res) {
    failed += !r.ok;
    cases.push_back({{"name", r.name}, {"ok", r.ok}, {"detail", r.detail}});
  }
  json j = {{"trials", trials}, {"passed", res.size() - failed}, {"failed", failed}, {"cases", cases}};
  if (g.json) std::cout << j.dump() << "\n";
  else std::cout << res.size() - failed << "/" << res.size() << " passed\n";
  return failed ? kValidation : kOk;
}

int cmd_gen_model(const Globals& g, const std::string& topology, const std::string& act, bool bias, double scale,
                  const std::string& name, const std::string& out) {
  auto m = make_fc_model(parse_topology(topology), parse_activation(act), g.seed ? g.seed : 1, scale, bias);
  if (!name.empty()) m.name = name;
  save_model(m, out);
  auto st = analytic_stats(m, CompileMode::Unrolled);
  json j = {{"name", m.name}, {"architecture", architecture_string(m)}, {"out", out},
            {"nonxor_estimate", st.nonxor_count}};
  print(g, j, architecture_string(m) + "  -> " + out);
  return kOk;
}

int cmd_gen_data(const Globals& g, const std::string& kind, size_t dim, size_t samples, size_t rank, double noise,
                 const std::string& out_x, const std::string& out_y) {
  const uint64_t seed = g.seed ? g.seed : 1;
  Dataset d;
  if (kind == "low-rank") d = synthetic_low_rank(dim, samples, rank, noise, seed);
  else if (kind == "two-class") d = synthetic_two_class(dim, samples, seed);
  else throw Error(Errc::InvalidArgument, "kind must be low-rank or two-class");
  write_csv_samples(d.X, out_x);
  write_csv_labels(d.y, out_y);
  json j = {{"kind", kind}, {"dim", dim}, {"samples", samples}, {"x", out_x}, {"labels", out_y}};
  print(g, j, std::to_string(samples) + " samples -> " + out_x + ", " + out_y);
  return kOk;
}

void setup_logging(const std::string& level) {
  auto log = spdlog::stderr_color_mt("gcinfer");
  spdlog::set_default_logger(log);
  auto lv = spdlog::level::from_str(level);
  if (lv == spdlog::level::off && level != "off") throw Error(Errc::InvalidArgument, "bad log level " + level);
  spdlog::set_level(lv);
}

void insecure_banner() {
  std::cerr << "****************************************************************\n"
               "*  INSECURE: --ot-mode test-dealer hands the receiver's choice  *\n"
               "*  bits to the sender. Use only for tests and benchmarks.       *\n"
               "****************************************************************\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcinfer: garbled-circuit neural network inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gcinfer ") + GCINFER_VERSION + "\nprotocol " +
                                        std::to_string(kProtocolVersion) + "\ncipher " + kCipherId + "\ngroup " +
                                        kGroupId);
  Globals g;
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
  app.add_option("--seed", g.seed, "fixed seed for garbling, shares and data (0 = random)");
  app.add_option("--ot-mode", g.ot_mode, "secure or test-dealer")
      ->check(CLI::IsMember({"secure", "test-dealer"}))
      ->capture_default_str();
  app.add_flag("--json", g.json, "machine-readable output");

  std::function<int()> run;

  auto* c = app.add_subcommand("compile", "lower a model to a netlist");
  std::string c_model, c_mode = "unrolled", c_out, c_stats;
  bool c_outsourced = false;
  c->add_option("--model", c_model)->required();
  c->add_option("--mode", c_mode)->check(CLI::IsMember({"unrolled", "folded"}))->capture_default_str();
  c->add_flag("--outsourced", c_outsourced, "prepend the XOR-share input layer");
  c->add_option("--out", c_out, "netlist file");
  c->add_option("--stats", c_stats, "stats json file, - for stdout");
  c->callback([&] { run = [&] { return cmd_compile(g, c_model, c_mode, c_outsourced, c_out, c_stats); }; });

  auto* s = app.add_subcommand("stats", "gate counts of a netlist");
  std::string s_netlist;
  s->add_option("--netlist", s_netlist)->required();
  s->callback([&] { run = [&] { return cmd_stats(g, s_netlist); }; });

  auto* e = app.add_subcommand("estimate", "computation and communication cost");
  EstimateArgs ea;
  e->add_option("--netlist", ea.netlist);
  e->add_option("--model", ea.model);
  e->add_option("--mode", ea.mode);
  e->add_flag("--analytic", ea.analytic, "closed form from component counts");
  e->add_option("--published", ea.published, "benchmark1..benchmark4 published counts");
  e->add_option("--bw", ea.bw, "network bandwidth, bits/s");
  e->add_option("--f-cpu", ea.p.f_cpu)->capture_default_str();
  e->add_option("--clk-xor", ea.p.clk_xor)->capture_default_str();
  e->add_option("--clk-nonxor", ea.p.clk_nonxor)->capture_default_str();
  e->add_option("--n-bits", ea.p.n_bits)->capture_default_str();
  e->callback([&] { run = [&] { return cmd_estimate(g, ea); }; });

  auto* p = app.add_subcommand("preprocess", "build the data projection");
  PreprocessArgs pa;
  p->add_option("--train", pa.train, "samples csv, one row per sample")->required();
  p->add_option("--labels", pa.labels)->required();
  p->add_option("--gamma", pa.gamma)->capture_default_str();
  p->add_option("--patience", pa.patience, "early-stop patience (0 = none)");
  p->add_option("--batch", pa.batch)->capture_default_str();
  p->add_option("--out", pa.out)->required();
  p->add_option("--model", pa.model, "FC model retrained on projected batches");
  p->add_option("--model-out", pa.model_out);
  p->add_option("--lr", pa.lr)->capture_default_str();
  p->add_option("--val-fraction", pa.val_fraction)->capture_default_str();
  p->callback([&] { run = [&] { return cmd_preprocess(g, pa); }; });

  auto* pr = app.add_subcommand("prune", "magnitude pruning with optional retraining");
  PruneArgs ra;
  pr->add_option("--model", ra.model)->required();
  pr->add_option("--fraction", ra.fraction);
  pr->add_option("--threshold", ra.threshold);
  pr->add_option("--retrain-epochs", ra.epochs)->capture_default_str();
  pr->add_option("--train", ra.train);
  pr->add_option("--labels", ra.labels);
  pr->add_option("--lr", ra.lr)->capture_default_str();
  pr->add_option("--batch", ra.batch)->capture_default_str();
  pr->add_option("--out", ra.out)->required();
  pr->callback([&] { run = [&] { return cmd_prune(g, ra); }; });

  auto* sv = app.add_subcommand("serve", "evaluator server");
  std::string sv_model, sv_netlist, sv_listen;
  size_t sv_sessions = 0;
  sv->add_option("--model", sv_model)->required();
  sv->add_option("--netlist", sv_netlist)->required();
  sv->add_option("--listen", sv_listen, "host:port")->required();
  sv->add_option("--sessions", sv_sessions, "stop after this many (0 = forever)");
  sv->callback([&] { run = [&] { return cmd_serve(g, sv_model, sv_netlist, sv_listen, sv_sessions); }; });

  auto* in = app.add_subcommand("infer", "garbler client");
  std::string in_input, in_netlist, in_connect, in_proxy;
  bool in_outsource = false;
  int in_timeout = 5000;
  in->add_option("--input", in_input)->required();
  in->add_option("--netlist", in_netlist)->required();
  in->add_option("--connect", in_connect, "server host:port")->required();
  in->add_flag("--outsource", in_outsource);
  in->add_option("--proxy", in_proxy, "proxy host:port");
  in->add_option("--timeout-ms", in_timeout)->capture_default_str();
  in->callback([&] {
    run = [&] { return cmd_infer(g, in_input, in_netlist, in_connect, in_outsource, in_proxy, in_timeout); };
  });

  auto* px = app.add_subcommand("proxy", "garbling proxy for outsourced clients");
  std::string px_netlist, px_listen, px_connect;
  size_t px_sessions = 0;
  int px_timeout = 5000;
  px->add_option("--netlist", px_netlist)->required();
  px->add_option("--listen", px_listen)->required();
  px->add_option("--connect", px_connect, "server host:port")->required();
  px->add_option("--sessions", px_sessions);
  px->add_option("--timeout-ms", px_timeout)->capture_default_str();
  px->callback([&] {
    run = [&] { return cmd_proxy(g, px_netlist, px_listen, px_connect, px_sessions, px_timeout); };
  });

  auto* st = app.add_subcommand("selftest", "garbled vs plaintext on every component");
  size_t st_trials = 200;
  st->add_option("--trials", st_trials)->capture_default_str();
  st->callback([&] { run = [&] { return cmd_selftest(g, st_trials); }; });

  auto* gm = app.add_subcommand("gen-model", "seeded FC model");
  std::string gm_topology, gm_act = "relu", gm_name, gm_out;
  bool gm_bias = false;
  double gm_scale = 1.0;
  gm->add_option("--topology", gm_topology, "e.g. 617,50,26")->required();
  gm->add_option("--act", gm_act)->capture_default_str();
  gm->add_flag("--bias", gm_bias);
  gm->add_option("--scale", gm_scale)->capture_default_str();
  gm->add_option("--name", gm_name);
  gm->add_option("--out", gm_out)->required();
  gm->callback([&] { run = [&] { return cmd_gen_model(g, gm_topology, gm_act, gm_bias, gm_scale, gm_name, gm_out); }; });

  auto* gd = app.add_subcommand("gen-data", "synthetic training data");
  std::string gd_kind = "low-rank", gd_x, gd_y;
  size_t gd_dim = 20, gd_n = 200, gd_rank = 5;
  double gd_noise = 1e-3;
  gd->add_option("--kind", gd_kind)->capture_default_str();
  gd->add_option("--dim", gd_dim)->capture_default_str();
  gd->add_option("--samples", gd_n)->capture_default_str();
  gd->add_option("--rank", gd_rank)->capture_default_str();
  gd->add_option("--noise", gd_noise)->capture_default_str();
  gd->add_option("--out-x", gd_x)->required();
  gd->add_option("--out-y", gd_y)->required();
  gd->callback([&] { run = [&] { return cmd_gen_data(g, gd_kind, gd_dim, gd_n, gd_rank, gd_noise, gd_x, gd_y); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    setup_logging(g.log_level);
    if (g.ot_mode == "test-dealer") insecure_banner();
    return run();
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kValidation;
  }
}
