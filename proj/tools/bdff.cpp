#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "bdff/checkpoint.hpp"
#include "bdff/dataset.hpp"
#include "bdff/grad_suite.hpp"
#include "bdff/lightfield.hpp"
#include "bdff/parallel.hpp"
#include "bdff/pfm_io.hpp"
#include "bdff/png_io.hpp"
#include "bdff/train.hpp"

namespace fs = std::filesystem;
using namespace bdff;

namespace {

constexpr const char* kVersion = "bdff 0.1.0";

// every run leaves its resolved configuration and a version stamp behind
void write_run_stamp(const std::string& out_dir, const nlohmann::json& resolved) {
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "config.json");
    os << resolved.dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(out_dir) / "version.txt");
    os << kVersion << "\n";
  }
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return nlohmann::json::parse(is);
}

ImageU8 disparity_viz(const ImageF& disp) {
  return quantize_u8(disp);
}

train::TrainConfig config_from_file(const std::string& path) {
  if (path.empty()) return train::TrainConfig{};
  return train::TrainConfig::from_json(load_json(path));
}

std::map<std::string, std::string> parse_inits(const std::vector<std::string>& kv) {
  std::map<std::string, std::string> out;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--init expects name=path, got '" + s + "'");
    }
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::map<std::string, std::string> ckpt_dir_map(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const char* name : {"edof", "focus", "focus2", "stereo", "bdff"}) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".ckpt");
    if (fs::exists(p)) out[name] = p.string();
  }
  return out;
}

std::vector<double> parse_slopes(const std::string& spec) {
  // a:b:n -> n slopes evenly spaced over [a, b]
  const auto c1 = spec.find(':');
  const auto c2 = spec.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) {
    throw ConfigError("--slopes expects a:b:n, got '" + spec + "'");
  }
  const double a = std::stod(spec.substr(0, c1));
  const double b = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
  const int n = std::stoi(spec.substr(c2 + 1));
  if (n < 1) throw ConfigError("--slopes: need at least one slope");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  }
  return out;
}

optics::FocalStack load_stack_dir(const std::string& dir, const std::string& eye) {
  data::SamplePair sample = data::load_sample(dir);
  return eye == "right" ? sample.right_stack : sample.left_stack;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binocular depth-from-focal-stack toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (default: BDFF_THREADS or cores)");

  // ---- gen-dataset ----
  auto* gen = app.add_subcommand("gen-dataset", "synthesize a binocular focal-stack dataset");
  uint64_t gen_seed = 1;
  int gen_count = 60, gen_test = -1, gen_size = 192, gen_objects = 6;
  double gen_noise = 1000.0, gen_maxdisp = 30.0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--count", gen_count, "training sample count");
  gen->add_option("--test-count", gen_test, "test sample count (default count/6)");
  gen->add_option("--size", gen_size, "image extent (multiple of 8)");
  gen->add_option("--objects", gen_objects, "objects per scene");
  gen->add_option("--noise-peak", gen_noise, "Poisson photons at full scale, 0 disables");
  gen->add_option("--max-disparity", gen_maxdisp, "pixel disparity of the nearest layer");
  gen->add_option("--out", gen_out, "output directory")->required();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train one network stage");
  std::string tr_net, tr_data, tr_config, tr_out, tr_stage = "auto";
  std::vector<std::string> tr_inits;
  tr->add_option("--net", tr_net, "edof|focus|focus2|stereo|bdff")->required();
  tr->add_option("--data", tr_data, "manifest.json path")->required();
  tr->add_option("--config", tr_config, "training config JSON");
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_option("--init", tr_inits, "pretrained checkpoint name=path (repeatable)");
  tr->add_option("--stage", tr_stage, "pretrain|finetune|auto");

  // ---- infer ----
  auto* in = app.add_subcommand("infer", "run a trained model on one sample");
  std::string in_net = "bdff", in_data, in_sample, in_ckpts, in_out, in_config;
  in->add_option("--net", in_net, "edof|focus|focus2|stereo|bdff");
  in->add_option("--data", in_data, "manifest.json path")->required();
  in->add_option("--sample", in_sample, "sample id (default: first test sample)");
  in->add_option("--ckpt-dir", in_ckpts, "directory with <net>.ckpt files")->required();
  in->add_option("--config", in_config, "training config JSON (for width)");
  in->add_option("--out", in_out, "output directory")->required();

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate all models on the test split");
  std::string ev_data, ev_ckpts, ev_out, ev_config;
  ev->add_option("--data", ev_data, "manifest.json path")->required();
  ev->add_option("--ckpt-dir", ev_ckpts, "directory with <net>.ckpt files")->required();
  ev->add_option("--config", ev_config, "training config JSON (for width)");
  ev->add_option("--out", ev_out, "output directory")->required();

  // ---- refocus ----
  auto* rf = app.add_subcommand("refocus", "shift-and-add a light field into a focal stack");
  std::string rf_lf, rf_slopes, rf_out;
  rf->add_option("--lf", rf_lf, "light-field descriptor JSON")->required();
  rf->add_option("--slopes", rf_slopes, "a:b:n slope sweep (px per angular step)")->required();
  rf->add_option("--out", rf_out, "output directory")->required();

  // ---- edof ----
  auto* ed = app.add_subcommand("edof", "all-in-focus image from one focal stack");
  std::string ed_stack, ed_eye = "left", ed_ckpt, ed_out, ed_config;
  ed->add_option("--stack", ed_stack, "sample directory")->required();
  ed->add_option("--eye", ed_eye, "left|right");
  ed->add_option("--ckpt", ed_ckpt, "EDoFNet checkpoint")->required();
  ed->add_option("--config", ed_config, "training config JSON (for width)");
  ed->add_option("--out", ed_out, "output directory")->required();

  // ---- dff-baseline ----
  auto* df = app.add_subcommand("dff-baseline", "classical depth-from-focus on a stack");
  std::string df_stack, df_eye = "left", df_out;
  df->add_option("--stack", df_stack, "sample directory")->required();
  df->add_option("--eye", df_eye, "left|right");
  df->add_option("--out", df_out, "output directory")->required();

  // ---- grad-check ----
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient suite");
  double gc_tol = 1e-3;
  int gc_elems = 4;
  gc->add_option("--tolerance", gc_tol, "max relative error per block");
  gc->add_option("--max-elems", gc_elems, "sampled elements per block in composite graphs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
    app.exit(e);
    return 2;
  }
  if (threads > 0) set_num_threads(threads);

  try {
    if (*gen) {
      data::DatasetConfig cfg;
      cfg.seed = gen_seed;
      cfg.train_count = gen_count;
      cfg.test_count = gen_test >= 0 ? gen_test : std::max(1, gen_count / 6);
      cfg.scene.width = cfg.scene.height = gen_size;
      cfg.scene.n_objects = gen_objects;
      cfg.scene.max_disparity_px = gen_maxdisp;
      cfg.build.noise_peak = gen_noise;
      cfg.scene.validate();
      data::Manifest m = data::generate_dataset(cfg, gen_out);
      write_run_stamp(gen_out, cfg.to_json());
      std::cout << "wrote " << m.train_ids.size() << " train + " << m.test_ids.size()
                << " test samples under " << gen_out << "\n";
    } else if (*tr) {
      const train::NetKind kind = train::net_from_name(tr_net);
      train::TrainConfig cfg = config_from_file(tr_config);
      auto inits = parse_inits(tr_inits);
      if (tr_stage == "finetune" && inits.empty()) {
        throw UsageError("--stage finetune requires --init checkpoints");
      }
      if (tr_stage == "pretrain") inits.clear();
      data::Manifest m = data::read_manifest(tr_data);
      nlohmann::json resolved = cfg.to_json();
      resolved["net"] = tr_net;
      resolved["data"] = tr_data;
      resolved["stage"] = tr_stage;
      for (const auto& [k, v] : inits) resolved["init"][k] = v;
      write_run_stamp(tr_out, resolved);
      train::TrainResult r = train::train_network(kind, m, cfg, inits, tr_out);
      std::cout << "best epoch " << r.best_epoch << ", checkpoint " << r.checkpoint << "\n";
      if (r.aborted) {
        std::cerr << "training aborted on non-finite loss; kept last good checkpoint\n";
        return 1;
      }
    } else if (*in) {
      const train::NetKind kind = train::net_from_name(in_net);
      train::TrainConfig cfg = config_from_file(in_config);
      data::Manifest m = data::read_manifest(in_data);
      const std::string id = in_sample.empty()
                                 ? (m.test_ids.empty() ? m.train_ids.at(0) : m.test_ids.at(0))
                                 : in_sample;
      data::SamplePair sample = data::load_sample(m.sample_dir(id));
      nets::WidthConfig w;
      w.base = cfg.width;
      train::ModelBundle bundle(kind, w, ckpt_dir_map(in_ckpts));
      write_run_stamp(in_out, {{"net", in_net}, {"sample", id}, {"width", cfg.width}});
      ImageF out = bundle.infer(sample);
      if (kind == train::NetKind::Edof) {
        write_png((fs::path(in_out) / "edof.png").string(), out);
      } else {
        write_pfm((fs::path(in_out) / "depth.pfm").string(), out);
        write_png((fs::path(in_out) / "depth.png").string(), disparity_viz(out));
        std::cout << "mae vs ground truth: " << train::mae(out, sample.gt_disparity) << "\n";
      }
      std::cout << "outputs under " << in_out << "\n";
    } else if (*ev) {
      train::TrainConfig cfg = config_from_file(ev_config);
      data::Manifest m = data::read_manifest(ev_data);
      write_run_stamp(ev_out, {{"data", ev_data}, {"width", cfg.width}});
      train::EvalReport report = train::compare_models(m, ckpt_dir_map(ev_ckpts), cfg);
      {
        std::ofstream os(fs::path(ev_out) / "eval.json");
        os << report.to_json().dump(2) << "\n";
      }
      {
        std::ofstream os(fs::path(ev_out) / "eval.csv");
        os << report.to_csv();
      }
      std::cout << report.to_csv();
    } else if (*rf) {
      const std::vector<double> slopes = parse_slopes(rf_slopes);
      lf::LightField field = lf::load_light_field(rf_lf);
      optics::FocalStack stack = lf::refocus_stack_from_lf(field, slopes);
      write_run_stamp(rf_out, {{"lf", rf_lf}, {"slopes", slopes}});
      for (size_t i = 0; i < stack.slices.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "slice_%02zu.png", i);
        write_png((fs::path(rf_out) / name).string(), stack.slices[i]);
      }
      nlohmann::json sidecar = {{"slopes", slopes}, {"slices", stack.slices.size()}};
      std::ofstream os(fs::path(rf_out) / "stack.json");
      os << sidecar.dump(2) << "\n";
      std::cout << "wrote " << stack.slices.size() << " refocused slices under " << rf_out
                << "\n";
    } else if (*ed) {
      train::TrainConfig cfg = config_from_file(ed_config);
      optics::FocalStack stack = load_stack_dir(ed_stack, ed_eye);
      data::SamplePair sample;
      sample.left_stack = stack;
      nets::WidthConfig w;
      w.base = cfg.width;
      train::ModelBundle bundle(train::NetKind::Edof, w, {{"edof", ed_ckpt}});
      write_run_stamp(ed_out, {{"stack", ed_stack}, {"eye", ed_eye}});
      write_png((fs::path(ed_out) / "edof.png").string(), bundle.infer(sample));
      std::cout << "wrote edof.png under " << ed_out << "\n";
    } else if (*df) {
      optics::FocalStack stack = load_stack_dir(df_stack, df_eye);
      lf::DffResult r = lf::classical_dff(stack);
      write_run_stamp(df_out, {{"stack", df_stack}, {"eye", df_eye}});
      write_pfm((fs::path(df_out) / "layer_index.pfm").string(), r.layer_index);
      write_pfm((fs::path(df_out) / "confidence.pfm").string(), r.confidence);
      ImageF viz = r.layer_index;
      const float scale = 1.0f / std::max<size_t>(stack.slices.size() - 1, 1);
      for (auto& v : viz.v) v *= scale;
      write_png((fs::path(df_out) / "layer_index.png").string(), viz);
      std::cout << "wrote layer_index / confidence under " << df_out << "\n";
    } else if (*gc) {
      const auto suite = nn::run_grad_suite(gc_tol, gc_elems);
      bool all_pass = true;
      for (const auto& [name, report] : suite) {
        std::cout << "== " << name << " (tolerance " << gc_tol << ") ==\n"
                  << report.table();
        all_pass = all_pass && report.pass();
      }
      std::cout << (all_pass ? "all gradient checks passed\n"
                             : "gradient checks FAILED\n");
      return all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
