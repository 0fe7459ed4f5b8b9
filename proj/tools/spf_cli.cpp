// Command-line surface: dataset generation, training, evaluation,
// ablations, gradient checks and single-image prediction.
//
// Exit codes: 0 success, 1 check failure, 2 usage, 3 I/O, 4 numeric abort,
// 5 incompatibility.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"

#include "spf/checkpoint.hpp"
#include "spf/config.hpp"
#include "spf/data.hpp"
#include "spf/gradcheck.hpp"
#include "spf/metrics.hpp"
#include "spf/model.hpp"
#include "spf/png_io.hpp"
#include "spf/train.hpp"

namespace fs = std::filesystem;
using namespace spf;

namespace {

struct Incompat : std::runtime_error {
  explicit Incompat(const std::string& msg) : std::runtime_error(msg) {}
};

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void echo_resolved(const std::string& out_dir, const KvMap& kv) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
  save_kv_file(out_dir.empty() ? "resolved.cfg" : out_dir + "/resolved.cfg", kv);
}

std::string parent_dir(const std::string& path) {
  const auto p = fs::path(path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

// ---- gen-data --------------------------------------------------------------

struct GenArgs {
  std::string out, config;
  int n = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int shapes = -1;
  double noise = -1.0;
  int per_image = -1;
};

int cmd_gen_data(const GenArgs& args) {
  KvMap kv;
  if (!args.config.empty()) kv = load_kv_file(args.config);
  SynthConfig cfg;
  cfg.n_images = args.n >= 0 ? args.n : kv_int(kv, "synth.n", cfg.n_images);
  cfg.seed = args.seed_set ? args.seed : kv_u64(kv, "synth.seed", cfg.seed);
  cfg.num_shapes = args.shapes >= 0 ? args.shapes : kv_int(kv, "synth.shapes", cfg.num_shapes);
  cfg.noise_sigma = args.noise >= 0.0 ? args.noise : kv_double(kv, "synth.noise", cfg.noise_sigma);
  cfg.shapes_per_image =
      args.per_image >= 0 ? args.per_image : kv_int(kv, "synth.shapes_per_image", cfg.shapes_per_image);
  cfg.canvas_h = kv_int(kv, "synth.canvas_h", cfg.canvas_h);
  cfg.canvas_w = kv_int(kv, "synth.canvas_w", cfg.canvas_w);
  cfg.jitter = kv_int(kv, "synth.jitter", cfg.jitter);
  std::string out = !args.out.empty() ? args.out : kv.count("io.out") ? kv.at("io.out") : "";
  if (out.empty()) throw ConfigError("gen-data: --out is required");
  cfg.validate();

  Manifest m = generate_synthetic(cfg, out);

  KvMap resolved;
  resolved["synth.n"] = std::to_string(cfg.n_images);
  resolved["synth.seed"] = std::to_string(cfg.seed);
  resolved["synth.shapes"] = std::to_string(cfg.num_shapes);
  resolved["synth.noise"] = fmtg(cfg.noise_sigma);
  resolved["synth.shapes_per_image"] = std::to_string(cfg.shapes_per_image);
  resolved["synth.canvas_h"] = std::to_string(cfg.canvas_h);
  resolved["synth.canvas_w"] = std::to_string(cfg.canvas_w);
  resolved["synth.jitter"] = std::to_string(cfg.jitter);
  resolved["io.out"] = out;
  echo_resolved(out, resolved);

  std::vector<int> counts(static_cast<std::size_t>(m.num_labels()), 0);
  for (const auto& row : m.rows)
    for (std::size_t i = 0; i < row.targets.size(); ++i) counts[i] += row.targets[i];
  std::cout << "wrote " << m.rows.size() << " images, " << m.num_labels() << " labels to " << out
            << "\n";
  for (int i = 0; i < m.num_labels(); ++i)
    std::cout << m.label_names[static_cast<std::size_t>(i)] << ": " << counts[static_cast<std::size_t>(i)]
              << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data, out, config, preset, flatten;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int code_dim = -1;
  double recon_weight = -1.0;
  int epochs = -1;
};

ModelConfig resolve_train_config(const TrainArgs& args, const KvMap& kv) {
  // Precedence: flag > config file > preset default.
  KvMap merged = kv;
  if (!args.preset.empty()) merged["model.preset"] = args.preset;
  ModelConfig cfg = model_config_from_kv(merged);
  if (!args.flatten.empty()) {
    if (args.flatten == "spf")
      cfg.flatten = FlattenStrategy::Spf;
    else if (args.flatten == "baseline")
      cfg.flatten = FlattenStrategy::Baseline;
    else
      throw ConfigError("train: --flatten must be spf or baseline");
  }
  if (args.code_dim > 0) cfg.spf.code_dim = args.code_dim;
  if (args.recon_weight >= 0.0) cfg.spf.recon_weight = args.recon_weight;
  if (args.epochs >= 0) cfg.epochs = args.epochs;
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  KvMap kv;
  if (!args.config.empty()) kv = load_kv_file(args.config);
  const std::string data_dir = !args.data.empty() ? args.data : kv.count("io.data") ? kv.at("io.data") : "";
  const std::string out_path = !args.out.empty() ? args.out : kv.count("io.out") ? kv.at("io.out") : "";
  if (data_dir.empty()) throw ConfigError("train: --data is required");
  if (out_path.empty()) throw ConfigError("train: --out is required");

  ModelConfig cfg = resolve_train_config(args, kv);

  Manifest manifest = load_manifest(data_dir);
  cfg.num_labels = manifest.num_labels();
  cfg.label_names = manifest.label_names;
  if (manifest.canvas_h != cfg.backbone.input_h || manifest.canvas_w != cfg.backbone.input_w)
    throw Incompat("train: dataset images are " + std::to_string(manifest.canvas_w) + "x" +
                   std::to_string(manifest.canvas_h) + " but the model expects " +
                   std::to_string(cfg.backbone.input_w) + "x" + std::to_string(cfg.backbone.input_h));
  cfg.validate();

  const std::string out_dir = parent_dir(out_path);
  fs::create_directories(out_dir);
  KvMap resolved = model_config_to_kv(cfg);
  resolved["io.data"] = data_dir;
  resolved["io.out"] = out_path;
  echo_resolved(out_dir, resolved);

  const auto dataset = load_all(manifest);
  const Splits splits = split_dataset(manifest.size(), {0.7, 0.1, 0.2}, cfg.seed);

  FitResult result = fit(dataset, splits, cfg, [](const EpochStats& h) {
    std::cout << "epoch " << h.epoch << " bce " << fmtg(h.bce) << " recon " << fmtg(h.recon)
              << " total " << fmtg(h.total) << " val_macro_auc " << fmtg(h.val_macro_auc)
              << std::endl;
  });

  save_checkpoint(out_path, result.checkpoint);
  write_history_csv(out_dir + "/history.csv", result.history);
  std::cout << "checkpoint " << out_path << " (best epoch " << result.checkpoint.meta.best_epoch
            << ", val macro AUC " << fmtg(result.checkpoint.meta.best_val_macro_auc) << ")\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, data, split = "test", report;
  int bootstrap = 0;
  double alpha = 0.05;
};

int cmd_eval(const EvalArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.ckpt);
  Manifest manifest = load_manifest(args.data);
  if (manifest.num_labels() != ckpt.cfg.num_labels)
    throw Incompat("eval: dataset has " + std::to_string(manifest.num_labels()) +
                   " labels but the checkpoint was trained with " +
                   std::to_string(ckpt.cfg.num_labels));

  const Splits splits = split_dataset(manifest.size(), {0.7, 0.1, 0.2}, ckpt.cfg.seed);
  const std::vector<int>* rows = nullptr;
  if (args.split == "train")
    rows = &splits.train;
  else if (args.split == "val")
    rows = &splits.val;
  else if (args.split == "test")
    rows = &splits.test;
  else
    throw ConfigError("eval: --split must be train, val or test");

  Model<float> model = model_from_checkpoint(ckpt);
  const auto dataset = load_all(manifest);
  const EvalData data = collect_scores(dataset, *rows, model);
  MetricsReport report = compute_metrics(data, manifest.label_names);
  if (args.bootstrap > 0) {
    report.n_bootstrap = args.bootstrap;
    report.bootstrap_seed = ckpt.cfg.seed;
    report.macro_ci = bootstrap_ci(data, Aggregate::Macro, args.bootstrap, args.alpha, ckpt.cfg.seed);
    report.weighted_ci =
        bootstrap_ci(data, Aggregate::Weighted, args.bootstrap, args.alpha, ckpt.cfg.seed);
  }

  const std::string out_dir = parent_dir(args.report);
  fs::create_directories(out_dir);
  write_metrics_csv(args.report, report);

  KvMap resolved;
  resolved["io.ckpt"] = args.ckpt;
  resolved["io.data"] = args.data;
  resolved["io.report"] = args.report;
  resolved["eval.split"] = args.split;
  resolved["eval.bootstrap"] = std::to_string(args.bootstrap);
  resolved["eval.alpha"] = fmtg(args.alpha);
  echo_resolved(out_dir, resolved);

  std::cout << "split " << args.split << " n " << rows->size() << "\n";
  std::cout << "macro_auc " << fmtg(report.macro_auc) << "\n";
  std::cout << "weighted_auc " << fmtg(report.weighted_auc) << "\n";
  if (report.macro_ci)
    std::cout << "macro_ci " << fmtg(report.macro_ci->first) << " " << fmtg(report.macro_ci->second)
              << "\n";
  return 0;
}

// ---- ablate ----------------------------------------------------------------

struct AblateArgs {
  std::string data, report, config;
  std::vector<int> code_dims;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> arms = {"spf", "baseline"};
  int epochs = -1;
};

int cmd_ablate(const AblateArgs& args) {
  if (args.code_dims.empty() || args.seeds.empty())
    throw ConfigError("ablate: --code-dims and --seeds must be non-empty");
  for (const auto& arm : args.arms)
    if (arm != "spf" && arm != "baseline")
      throw ConfigError("ablate: unknown arm '" + arm + "'");

  KvMap kv;
  if (!args.config.empty()) kv = load_kv_file(args.config);

  Manifest manifest = load_manifest(args.data);
  const auto dataset = load_all(manifest);

  const std::string out_dir = parent_dir(args.report);
  fs::create_directories(out_dir);
  std::ofstream report(args.report);
  if (!report) throw IoError("ablate: cannot write " + args.report);
  report << "arm,code_dim,seed,macro_auc,weighted_auc\n";

  for (const auto& arm : args.arms) {
    for (int dim : args.code_dims) {
      std::vector<double> macros, weighteds;
      for (std::uint64_t seed : args.seeds) {
        ModelConfig cfg = model_config_from_kv(kv);
        cfg.flatten = arm == "spf" ? FlattenStrategy::Spf : FlattenStrategy::Baseline;
        cfg.spf.code_dim = dim;
        cfg.seed = seed;
        if (args.epochs >= 0) cfg.epochs = args.epochs;
        cfg.num_labels = manifest.num_labels();
        cfg.label_names = manifest.label_names;
        cfg.validate();

        const Splits splits = split_dataset(manifest.size(), {0.7, 0.1, 0.2}, seed);
        FitResult fitres = fit(dataset, splits, cfg);
        Model<float> model = model_from_checkpoint(fitres.checkpoint);
        const EvalData data = collect_scores(dataset, splits.test, model);
        MetricsReport metrics = compute_metrics(data, manifest.label_names);

        macros.push_back(metrics.macro_auc);
        weighteds.push_back(metrics.weighted_auc);
        report << arm << "," << dim << "," << seed << "," << fmtg(metrics.macro_auc) << ","
               << fmtg(metrics.weighted_auc) << "\n";
        report.flush();
        std::cout << arm << " d=" << dim << " seed=" << seed << " macro " << fmtg(metrics.macro_auc)
                  << " weighted " << fmtg(metrics.weighted_auc) << std::endl;
      }
      auto mean_sd = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
      };
      const auto [mm, ms] = mean_sd(macros);
      const auto [wm, ws] = mean_sd(weighteds);
      report << arm << "," << dim << ",summary," << fmtg(mm) << "±" << fmtg(ms) << "," << fmtg(wm)
             << "±" << fmtg(ws) << "\n";
    }
  }
  report.close();

  KvMap resolved;
  resolved["io.data"] = args.data;
  resolved["io.report"] = args.report;
  std::string dims, seeds;
  for (std::size_t i = 0; i < args.code_dims.size(); ++i)
    dims += (i ? "," : "") + std::to_string(args.code_dims[i]);
  for (std::size_t i = 0; i < args.seeds.size(); ++i)
    seeds += (i ? "," : "") + std::to_string(args.seeds[i]);
  std::string arms;
  for (std::size_t i = 0; i < args.arms.size(); ++i) arms += (i ? "," : "") + args.arms[i];
  resolved["ablate.code_dims"] = dims;
  resolved["ablate.seeds"] = seeds;
  resolved["ablate.arms"] = arms;
  if (args.epochs >= 0) resolved["ablate.epochs"] = std::to_string(args.epochs);
  echo_resolved(out_dir, resolved);
  return 0;
}

// ---- gradcheck ---------------------------------------------------------------

// Forward identity whose registered backward rule is off by 1%; exercises
// the checker's ability to catch a wrong gradient.
Var<double> faulty_identity(Var<double> x) {
  Tape<double>& tape = *x.tape;
  Tensor<double> out = tape.val(x);
  const int xid = x.id;
  return tape.push("faulty_identity", {xid}, std::move(out),
                   [xid](const Tape<double>&, const TensorD& gout, Tape<double>::Grads& grads) {
                     TensorD& gx = grads.accum(xid);
                     for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += 1.01 * gout[i];
                   });
}

int cmd_gradcheck(double tol, bool inject_conv_fault) {
  struct Row {
    std::string name;
    double err;
  };
  std::vector<Row> rows;
  Prng rng(424242);

  auto record = [&](const std::string& name, const GradCheckReport& r) {
    rows.push_back({name, r.max_rel_err});
  };

  record("dense", grad_check({{"x", random_tensor({6}, rng)},
                              {"w", random_tensor({4, 6}, rng)},
                              {"b", random_tensor({4}, rng)}},
                             [](Tape<double>& t, const std::vector<Var<double>>& v) {
                               return sum_all(dense(v[0], v[1], v[2]));
                             }));

  record("conv2d", grad_check({{"x", random_tensor({2, 6, 6}, rng)},
                               {"w", random_tensor({3, 2, 3, 3}, rng)},
                               {"b", random_tensor({3}, rng)}},
                              [inject_conv_fault](Tape<double>& t, const std::vector<Var<double>>& v) {
                                Var<double> y = conv2d(v[0], v[1], v[2], 1, 1, Pad::Same);
                                if (inject_conv_fault) y = faulty_identity(y);
                                return sum_all(y);
                              }));

  record("conv2d_dilated_strided",
         grad_check({{"x", random_tensor({2, 9, 9}, rng)},
                     {"w", random_tensor({2, 2, 3, 3}, rng)},
                     {"b", random_tensor({2}, rng)}},
                    [](Tape<double>& t, const std::vector<Var<double>>& v) {
                      return sum_all(conv2d(v[0], v[1], v[2], 2, 2, Pad::Same));
                    }));

  {
    TensorD sep({2, 4, 4});
    for (std::int64_t i = 0; i < sep.numel(); ++i)
      sep[i] = static_cast<double>((i * 37) % 32) / 16.0 - 1.0 + rng.uniform(-1e-4, 1e-4);
    record("maxpool2d", grad_check({{"x", sep}},
                                   [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                     return sum_all(maxpool2d(v[0], 2, 2));
                                   }));
  }

  record("avgpool_to_grid", grad_check({{"x", random_tensor({2, 4, 4}, rng)}},
                                       [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                         return sum_all(avgpool_to_grid(v[0], 2));
                                       }));

  record("upsample_nearest", grad_check({{"x", random_tensor({1, 3, 3}, rng)}},
                                        [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                          return sum_all(upsample_nearest(v[0], 2));
                                        }));

  record("relu_offset", grad_check({{"x", TensorD({4}, {-1.5, -0.3, 0.4, 2.0})}},
                                   [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                     return sum_all(relu(v[0]));
                                   }));

  record("sigmoid", grad_check({{"x", TensorD({3}, {-2.0, 0.0, 2.0})}},
                               [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                 return sum_all(sigmoid(v[0]));
                               }));

  record("mse", grad_check({{"a", random_tensor({5}, rng)}, {"b", random_tensor({5}, rng)}},
                           [](Tape<double>& t, const std::vector<Var<double>>& v) {
                             return mse(v[0], v[1]);
                           }));

  {
    TensorD y({5});
    for (int i = 0; i < 5; ++i) y[i] = rng.next_unit() < 0.5 ? 0.0 : 1.0;
    record("bce_with_logits", grad_check({{"z", random_tensor({5}, rng)}},
                                         [y](Tape<double>& t, const std::vector<Var<double>>& v) {
                                           return bce_with_logits(v[0], y);
                                         }));
  }

  record("spatial_dropout", grad_check({{"x", random_tensor({6, 3, 3}, rng)}},
                                       [](Tape<double>& t, const std::vector<Var<double>>& v) {
                                         Prng drop = Prng::derive(3, Stream::Dropout);
                                         return sum_all(spatial_dropout(v[0], 0.5, Mode::Train, drop));
                                       }));

  {
    ParamSet<double> ps;
    Prng init = Prng::derive(1, Stream::Init);
    BlockLayout bl;
    bl.convs.push_back(add_conv(ps, "c0", 2, 1, 3, init));
    bl.convs.push_back(add_conv(ps, "c1", 2, 2, 3, init));
    bl.skip = add_conv(ps, "skip", 2, 1, 1, init);
    bl.has_skip_proj = true;
    NamedInputs inputs = {{"x", random_tensor({1, 5, 5}, rng)}};
    for (std::size_t i = 0; i < ps.count(); ++i) inputs.emplace_back(ps.names[i], ps.tensors[i]);
    record("dilated_block",
           grad_check(inputs, [&](Tape<double>& t, const std::vector<Var<double>>& v) {
             BoundParams<double> bp;
             for (std::size_t i = 1; i < v.size(); ++i) bp.vars.push_back(v[i]);
             return sum_all(dilated_block(v[0], bl, bp, 2));
           }));
  }

  {
    ParamSet<double> ps;
    Prng init = Prng::derive(2, Stream::Init);
    std::vector<ConvRef> projs = {add_conv(ps, "p0", 2, 2, 1, init),
                                  add_conv(ps, "p1", 2, 2, 1, init)};
    NamedInputs inputs = {{"fine", random_tensor({2, 4, 4}, rng)},
                          {"coarse", random_tensor({2, 2, 2}, rng)}};
    for (std::size_t i = 0; i < ps.count(); ++i) inputs.emplace_back(ps.names[i], ps.tensors[i]);
    record("pyramid_fuse",
           grad_check(inputs, [&](Tape<double>& t, const std::vector<Var<double>>& v) {
             BoundParams<double> bp;
             for (std::size_t i = 2; i < v.size(); ++i) bp.vars.push_back(v[i]);
             return sum_all(pyramid_fuse(std::vector<Var<double>>{v[0], v[1]}, projs, bp));
           }));
  }

  {
    SpfConfig scfg;
    scfg.code_dim = 3;
    ParamSet<double> ps;
    Prng init = Prng::derive(3, Stream::Init);
    auto layout = build_autoencoder(scfg, 8, 8, "ae", ps, init);
    NamedInputs inputs = {{"map", random_tensor({1, 8, 8}, rng)}};
    for (std::size_t i = 0; i < ps.count(); ++i) inputs.emplace_back(ps.names[i], ps.tensors[i]);
    record("spf_encode_decode",
           grad_check(inputs, [&](Tape<double>& t, const std::vector<Var<double>>& v) {
             BoundParams<double> bp;
             for (std::size_t i = 1; i < v.size(); ++i) bp.vars.push_back(v[i]);
             auto code = encode_map(v[0], layout, bp);
             auto recon = decode_map(code, layout, bp, 8, 8);
             return mse(v[0], recon);
           }));
  }

  {
    ModelConfig cfg = tiny_preset();
    cfg.seed = 99;
    record("spf_model_composite", model_grad_check(cfg, 31));
  }

  int status = 0;
  std::string worst_name;
  double worst = 0.0;
  std::printf("%-24s %14s\n", "check", "max_rel_err");
  for (const auto& row : rows) {
    std::printf("%-24s %14.3e %s\n", row.name.c_str(), row.err, row.err < tol ? "ok" : "FAIL");
    if (row.err >= tol) status = 1;
    if (row.err > worst) {
      worst = row.err;
      worst_name = row.name;
    }
  }
  if (status != 0)
    std::fprintf(stderr, "gradcheck: worst offender %s at %.3e (tol %.1e)\n", worst_name.c_str(),
                 worst, tol);
  return status;
}

// ---- predict ---------------------------------------------------------------

int cmd_predict(const std::string& ckpt_path, const std::string& image_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  int h = 0, w = 0;
  const auto pixels = read_gray_png(image_path, h, w);
  if (h != ckpt.cfg.backbone.input_h || w != ckpt.cfg.backbone.input_w)
    throw Incompat("predict: image is " + std::to_string(w) + "x" + std::to_string(h) +
                   " but the model expects " + std::to_string(ckpt.cfg.backbone.input_w) + "x" +
                   std::to_string(ckpt.cfg.backbone.input_h));

  TensorF image({1, h, w});
  for (std::size_t i = 0; i < pixels.size(); ++i)
    image[static_cast<std::int64_t>(i)] = static_cast<float>(pixels[i]) / 255.0f;

  Model<float> model = model_from_checkpoint(ckpt);
  TensorF probs = predict_proba(image, model);

  std::vector<int> order(static_cast<std::size_t>(probs.numel()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });

  std::cout << "label,probability\n";
  for (int idx : order) {
    const std::string name = idx < static_cast<int>(ckpt.cfg.label_names.size())
                                 ? ckpt.cfg.label_names[static_cast<std::size_t>(idx)]
                                 : "label_" + std::to_string(idx);
    std::cout << name << "," << fmtg(probs[idx]) << "\n";
  }
  return 0;
}

template <typename F>
int run_guarded(F&& fn) {
  try {
    return fn();
  } catch (const Incompat& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 5;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatially-preserving flattening experiments"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic shape@quadrant dataset");
  gen_cmd->add_option("--out", gen.out, "output directory");
  gen_cmd->add_option("--n", gen.n, "number of images");
  gen_cmd->add_option("--seed", gen.seed, "generator seed")->each([&](const std::string&) {
    gen.seed_set = true;
  });
  gen_cmd->add_option("--shapes", gen.shapes, "shape kinds to use (1..4)");
  gen_cmd->add_option("--noise", gen.noise, "additive gaussian noise sigma");
  gen_cmd->add_option("--shapes-per-image", gen.per_image, "max shapes per image (1..2)");
  gen_cmd->add_option("--config", gen.config, "key=value config file");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model over the 70/10/20 split");
  train_cmd->add_option("--data", train.data, "dataset directory");
  train_cmd->add_option("--out", train.out, "checkpoint output path");
  train_cmd->add_option("--seed", train.seed, "training seed")->each([&](const std::string&) {
    train.seed_set = true;
  });
  train_cmd->add_option("--preset", train.preset, "desk, paper or tiny");
  train_cmd->add_option("--flatten", train.flatten, "spf or baseline");
  train_cmd->add_option("--code-dim", train.code_dim, "flatten code dimension");
  train_cmd->add_option("--recon-weight", train.recon_weight, "reconstruction loss weight");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--config", train.config, "key=value config file");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval.data, "dataset directory")->required();
  eval_cmd->add_option("--split", eval.split, "train, val or test");
  eval_cmd->add_option("--report", eval.report, "metrics CSV output path")->required();
  eval_cmd->add_option("--bootstrap", eval.bootstrap, "bootstrap resamples (0 = off)");
  eval_cmd->add_option("--alpha", eval.alpha, "bootstrap interval alpha");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate a flatten/code-dim grid");
  ablate_cmd->add_option("--data", ablate.data, "dataset directory")->required();
  ablate_cmd->add_option("--code-dims", ablate.code_dims, "code dimensions")->required()->delimiter(',');
  ablate_cmd->add_option("--seeds", ablate.seeds, "seeds")->required()->delimiter(',');
  ablate_cmd->add_option("--flatten-arms", ablate.arms, "arms to run")->delimiter(',');
  ablate_cmd->add_option("--report", ablate.report, "ablation CSV output path")->required();
  ablate_cmd->add_option("--epochs", ablate.epochs, "override training epochs");
  ablate_cmd->add_option("--config", ablate.config, "key=value config file");

  double tol = 1e-4;
  bool inject_fault = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every op");
  grad_cmd->add_option("--tol", tol, "maximum allowed relative error");
  grad_cmd->add_flag("--inject-conv-fault", inject_fault, "corrupt the conv gradient (test fixture)")
      ->group("");  // hidden

  std::string predict_ckpt, predict_image;
  auto* predict_cmd = app.add_subcommand("predict", "rank labels for one image");
  predict_cmd->add_option("--ckpt", predict_ckpt, "checkpoint path")->required();
  predict_cmd->add_option("--image", predict_image, "8-bit grayscale PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen_cmd->parsed()) return run_guarded([&] { return cmd_gen_data(gen); });
  if (train_cmd->parsed()) return run_guarded([&] { return cmd_train(train); });
  if (eval_cmd->parsed()) return run_guarded([&] { return cmd_eval(eval); });
  if (ablate_cmd->parsed()) return run_guarded([&] { return cmd_ablate(ablate); });
  if (grad_cmd->parsed()) return run_guarded([&] { return cmd_gradcheck(tol, inject_fault); });
  if (predict_cmd->parsed())
    return run_guarded([&] { return cmd_predict(predict_ckpt, predict_image); });
  return 2;
}
