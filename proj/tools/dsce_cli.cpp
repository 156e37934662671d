// SPDX-License-Identifier: Apache-2.0
// dsce: simulate | train | evaluate | correlate | complexity

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "dsce/harness.hpp"
#include "dsce/random.hpp"

namespace fs = std::filesystem;
using namespace dsce;

namespace {

struct LinkFlags {
  std::string preset;
  std::string profile = "VTV-SDWW";
  double fd = 1000.0;
  int mod = 4;
  int data_symbols = 100;
  int pilot_symbols = 3;
};

void add_link_flags(CLI::App* cmd, LinkFlags& f, bool multi_fd, std::vector<double>* fds) {
  cmd->add_option("--preset", f.preset, "mobility preset: low, high, very-high (sets fd, profile, Q)");
  cmd->add_option("--profile", f.profile, "power-delay profile")->capture_default_str();
  if (multi_fd)
    cmd->add_option("--fd", *fds, "Doppler in Hz; several values train one model each and average them");
  else
    cmd->add_option("--fd", f.fd, "Doppler in Hz")->capture_default_str();
  cmd->add_option("--mod", f.mod, "QAM order (4, 16, 64, ...)")->capture_default_str();
  cmd->add_option("--data-symbols,-I", f.data_symbols, "data symbols per frame")->capture_default_str();
  cmd->add_option("--pilot-symbols,-Q", f.pilot_symbols, "pilot symbols per frame (frame-by-frame)")
      ->capture_default_str();
}

LinkConfig resolve_link(const CLI::App* cmd, const LinkFlags& f) {
  LinkConfig link;
  link.profile = f.profile;
  link.doppler_hz = f.fd;
  link.modulation_order = f.mod;
  link.data_symbols = f.data_symbols;
  link.pilot_symbols = f.pilot_symbols;
  if (!f.preset.empty()) {
    const auto& p = mobility_preset(f.preset);
    // explicit flags win over the preset
    if (cmd->count("--profile") == 0) link.profile = p.profile;
    if (cmd->count("--fd") == 0) link.doppler_hz = p.doppler_hz;
    if (cmd->count("--pilot-symbols") == 0) link.pilot_symbols = p.pilot_symbols;
  }
  return link;
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << text;
  if (!f) throw RuntimeError("failed writing " + path.string());
}

void write_manifest_file(const fs::path& out, const std::string& command, const CLI::App& app,
                         std::map<std::string, std::string> extra) {
  std::ostringstream os;
  os << "# dsce manifest v1\n";
  extra["command"] = command;
  write_manifest(extra, os);
  os << "# effective options\n" << app.config_to_str(true, false);
  write_text(out / "manifest.txt", os.str());
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt17(x);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // keep large training buffers on the heap instead of fresh mmaps per batch
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Doubly-selective channel estimation toolkit"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "master seed for all randomness")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  // simulate -------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "generate a frame corpus with true channels");
  LinkFlags sim_link;
  add_link_flags(sim, sim_link, false, nullptr);
  std::size_t sim_frames = 100;
  double sim_snr = 40.0;
  std::string sim_mode = "sbs";
  sim->add_option("--frames", sim_frames, "frames to generate")->capture_default_str();
  sim->add_option("--snr", sim_snr, "SNR in dB (inf for noiseless)")->capture_default_str();
  sim->add_option("--mode", sim_mode, "frame layout: sbs or fbf")
      ->check(CLI::IsMember({"sbs", "fbf"}))
      ->capture_default_str();

  // train ----------------------------------------------------------------
  auto* trn = app.add_subcommand("train", "train recurrent estimators and save their models");
  LinkFlags trn_link;
  std::vector<double> trn_fds;
  add_link_flags(trn, trn_link, true, &trn_fds);
  std::vector<std::string> trn_est = {"gru-dpa-ta"};
  bool paper_scale = false;
  int epochs = -1, train_frames = -1, batch = -1;
  double lr = -1, train_snr = std::numeric_limits<double>::quiet_NaN();
  trn->add_option("--estimator", trn_est, "estimators to train")->capture_default_str();
  trn->add_flag("--paper-scale", paper_scale, "16000 frames, 500 epochs, batch 128 instead of 2000, 100, 16");
  trn->add_option("--epochs", epochs, "override the epoch count");
  trn->add_option("--train-frames", train_frames, "override the training frame count");
  trn->add_option("--batch", batch, "override the minibatch size");
  trn->add_option("--lr", lr, "override the learning rate");
  trn->add_option("--train-snr", train_snr, "training SNR in dB (inf for noiseless)");

  // evaluate -------------------------------------------------------------
  auto* evl = app.add_subcommand("evaluate", "Monte Carlo BER / NMSE / throughput sweep");
  LinkFlags evl_link;
  add_link_flags(evl, evl_link, false, nullptr);
  SweepConfig sweep;
  std::string model_dir;
  evl->add_option("--estimator", sweep.estimators, "estimators to evaluate")->capture_default_str();
  evl->add_option("--snr", sweep.snr_db, "SNR points in dB")->capture_default_str();
  evl->add_option("--frames", sweep.n_frames, "frames per SNR point")->capture_default_str();
  evl->add_option("--model-dir", model_dir, "directory holding <estimator>.model (default: --out)");
  evl->add_option("--wi-realizations", sweep.wi_training_realizations,
                  "realizations used to fit the interpolation weights")
      ->capture_default_str();

  // correlate ------------------------------------------------------------
  auto* cor = app.add_subcommand("correlate", "frame correlation profile psi");
  std::string cor_profile = "VTV-SDWW";
  double cor_fd = 250.0;
  int cor_symbols = 100;
  std::size_t cor_real = 5000;
  bool cor_raw = false;
  cor->add_option("--profile", cor_profile, "power-delay profile")->capture_default_str();
  cor->add_option("--fd", cor_fd, "Doppler in Hz")->capture_default_str();
  cor->add_option("--data-symbols,-I", cor_symbols, "profile length")->capture_default_str();
  cor->add_option("--frames,--realizations", cor_real, "channel realizations")->capture_default_str();
  cor->add_flag("--raw", cor_raw, "do not normalize by the self term");

  // complexity -----------------------------------------------------------
  auto* cpx = app.add_subcommand("complexity", "real-valued operation counts");
  std::vector<std::string> cpx_est;
  bool paper_mode = false;
  OpConfig op;
  cpx->add_option("--estimator", cpx_est, "estimators (default: all)");
  cpx->add_flag("--paper-mode", paper_mode, "recurrent stage and DPA-TA only");
  cpx->add_option("--hidden", op.hidden, "hidden size (0: estimator default)")->capture_default_str();
  cpx->add_option("--data-symbols,-I", op.data_symbols, "data symbols per frame")->capture_default_str();
  cpx->add_option("--pilot-symbols,-Q", op.pilot_symbols, "pilot symbols per frame")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = prepare_out(out_dir);

    if (*sim) {
      const LinkConfig link = resolve_link(sim, sim_link);
      const auto family = sim_mode == "sbs" ? EstimatorFamily::Sbs : EstimatorFamily::Fbf;
      const Scenario sc = link.scenario(family);
      const Corpus c = gen_dataset(sc, sim_frames, sim_snr, seed, kStreamTestCorpus);
      save_corpus(c, out / "corpus.bin");
      write_manifest_file(out, "simulate", app, {{"outputs", "corpus.bin"}});
      std::printf("wrote %zu frames to %s\n", c.frames.size(), (out / "corpus.bin").c_str());
    }

    if (*trn) {
      TrainPlan plan;
      plan.link = resolve_link(trn, trn_link);
      plan.dopplers = trn_fds;
      if (plan.dopplers.empty()) plan.dopplers.push_back(plan.link.doppler_hz);
      plan.train = paper_scale ? paper_scale_training() : desk_scale_training();
      if (epochs >= 0) plan.train.epochs = epochs;
      if (train_frames > 0) plan.train.n_train = train_frames;
      if (batch > 0) plan.train.batch_size = batch;
      if (lr > 0) plan.train.lr = lr;
      if (trn->count("--train-snr")) plan.train.train_snr_db = train_snr;
      plan.seed = seed;
      std::string outputs;
      for (const auto& name : trn_est) {
        std::fprintf(stderr, "training %s on %d frames x %d epochs, fd = %s Hz\n", name.c_str(),
                     plan.train.n_train, plan.train.epochs, join(plan.dopplers).c_str());
        const auto res = train_estimator(name, plan, [&](int epoch, double loss) {
          if ((epoch + 1) % 10 == 0 || epoch == 0) std::fprintf(stderr, "  epoch %d  mse %.6g\n", epoch + 1, loss);
        });
        if (res.diverged) std::fprintf(stderr, "warning: %s: %s\n", name.c_str(), res.message.c_str());
        rnn::save_model(res.model, out / (name + ".model"));
        std::ostringstream loss;
        loss << "# dsce loss v1\nfd_hz,epoch,mse\n";
        for (std::size_t d = 0; d < res.loss_history.size(); ++d)
          for (std::size_t e = 0; e < res.loss_history[d].size(); ++e)
            loss << fmt17(plan.dopplers[d]) << ',' << (e + 1) << ',' << fmt17(res.loss_history[d][e]) << '\n';
        write_text(out / ("loss_" + name + ".csv"), loss.str());
        outputs += (outputs.empty() ? "" : " ") + name + ".model loss_" + name + ".csv";
      }
      write_manifest_file(out, "train", app,
                          {{"outputs", outputs},
                           {"train.n_train", std::to_string(plan.train.n_train)},
                           {"train.epochs", std::to_string(plan.train.epochs)},
                           {"train.batch_size", std::to_string(plan.train.batch_size)},
                           {"train.lr", fmt17(plan.train.lr)},
                           {"train.snr_db", fmt17(plan.train.train_snr_db)},
                           {"train.fd_hz", join(plan.dopplers)}});
    }

    if (*evl) {
      sweep.link = resolve_link(evl, evl_link);
      sweep.seed = seed;
      const fs::path mdir = model_dir.empty() ? out : fs::path(model_dir);
      ModelSet models;
      for (const auto& name : sweep.estimators) {
        if (!estimator_info(name).neural) continue;
        const auto path = mdir / (name + ".model");
        if (!fs::exists(path)) throw InvalidArgument("missing model file " + path.string());
        models[name] = rnn::load_model(path);
      }
      const auto rows = run_ber_sweep(sweep, models);
      std::ostringstream csv;
      write_results_csv(rows, csv);
      write_text(out / "results.csv", csv.str());
      write_manifest_file(out, "evaluate", app,
                          {{"outputs", "results.csv"}, {"link.fd_hz", fmt17(sweep.link.doppler_hz)},
                           {"link.profile", sweep.link.profile},
                           {"link.pilot_symbols", std::to_string(sweep.link.pilot_symbols)}});
      std::cout << csv.str();
    }

    if (*cor) {
      const auto p = run_correlation(cor_profile, cor_fd, cor_symbols, cor_real, seed, !cor_raw);
      std::ostringstream csv;
      write_psi_csv(p, csv);
      write_text(out / "psi.csv", csv.str());
      write_manifest_file(out, "correlate", app, {{"outputs", "psi.csv"}});
      std::printf("psi[%d] = %s over %zu realizations\n", cor_symbols, fmt17(p.psi.back()).c_str(), p.realizations);
    }

    if (*cpx) {
      if (cpx_est.empty()) cpx_est = op_estimators();
      op.mode = paper_mode ? OpMode::Paper : OpMode::Full;
      std::vector<std::pair<OpConfig, OpCount>> counts;
      for (const auto& name : cpx_est) {
        OpConfig c = op;
        c.estimator = name;
        counts.emplace_back(c, count_ops(c));
        std::printf("%-12s %s  mults %lld  adds %lld\n", name.c_str(), paper_mode ? "paper" : "full",
                    static_cast<long long>(counts.back().second.mults),
                    static_cast<long long>(counts.back().second.adds));
      }
      std::ostringstream csv;
      write_opcounts_csv(counts, csv);
      write_text(out / "opcounts.csv", csv.str());
      write_manifest_file(out, "complexity", app, {{"outputs", "opcounts.csv"}});
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dsce: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
