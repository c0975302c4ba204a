#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "blv/blv.hpp"

namespace blv::cli {

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& tok : blv::detail::split(s, ',')) {
    const std::string t = blv::detail::strip(tok);
    if (!t.empty()) out.push_back(static_cast<int>(blv::detail::parse_int(t, "list option")));
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : blv::detail::split(s, ',')) {
    const std::string t = blv::detail::strip(tok);
    if (!t.empty()) out.push_back(blv::detail::parse_double(t, "list option"));
  }
  return out;
}

inline PriorKind parse_prior(const std::string& s) {
  if (s == "binomial") return PriorKind::binomial;
  if (s == "he") return PriorKind::homeostatic_egalitarian;
  throw CLI::ValidationError("--prior", "must be 'binomial' or 'he'");
}

// chunked parallel map with deterministic per-index output slots
template <typename Fn>
void parallel_for(std::size_t n, int n_threads, Fn&& fn) {
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads <= 0) n_threads = 1;
  }
  n_threads = std::min<std::size_t>(static_cast<std::size_t>(n_threads), std::max<std::size_t>(n, 1));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// per-cell type labels: "cell,type" rows with a header line
inline std::vector<std::string> load_cell_types(const std::string& path, int n_cells) {
  const std::string bytes = blv::detail::read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  std::vector<std::string> types(static_cast<std::size_t>(n_cells));
  bool saw_header = false;
  while (std::getline(in, line)) {
    line = blv::detail::strip(line);
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "cell,type") throw DataError(path + ": expected header 'cell,type'");
      saw_header = true;
      continue;
    }
    const auto parts = blv::detail::split(line, ',');
    if (parts.size() != 2) throw DataError(path + ": malformed row '" + line + "'");
    const int cell = static_cast<int>(blv::detail::parse_int(blv::detail::strip(parts[0]), path));
    if (cell < 0 || cell >= n_cells) throw DataError(path + ": cell id out of range");
    types[static_cast<std::size_t>(cell)] = blv::detail::strip(parts[1]);
  }
  if (!saw_header) throw DataError(path + ": no 'cell,type' header found");
  return types;
}

struct SynthOptions {
  SynthHyperparams hyper;
  int swap_iters = -1;
  std::uint64_t seed = 0;
  std::string out;
};

inline void add_hyper_options(CLI::App* cmd, SynthHyperparams& h) {
  cmd->add_option("--n", h.n_cells, "number of observed cells (N)")->required();
  cmd->add_option("--m", h.n_latents, "number of latent units (M)")->required();
  cmd->add_option("--k", h.k, "most probable number of active latents");
  cmd->add_option("--k-min", h.k_min, "minimum |z|");
  cmd->add_option("--k-max", h.k_max, "maximum |z|");
  cmd->add_option("--c", h.c, "most probable assembly size");
  cmd->add_option("--c-min", h.c_min, "minimum assembly size");
  cmd->add_option("--c-max", h.c_max, "maximum assembly size");
  cmd->add_option("--mu-p", h.mu_p, "member silence offset: member P ~ N(1-mu_p, sigma_p)");
  cmd->add_option("--sigma-p", h.sigma_p, "member silence sd");
  cmd->add_option("--mu-r", h.mu_r, "spontaneous firing level: R ~ N(1-mu_r, sigma_r)");
  cmd->add_option("--sigma-r", h.sigma_r, "spontaneous silence sd");
  cmd->add_option("--sigma-q", h.sigma_q, "sd of Q around K/M (0 pins Q = K/M)");
}

inline int cmd_synth(const SynthOptions& opt) {
  Rng rng(opt.seed);
  const GroundTruth gt = synthesize_gt(opt.hyper, rng, opt.swap_iters);
  save_ground_truth(opt.out, gt);
  double mean_size = 0.0;
  for (std::uint8_t b : gt.s) mean_size += b;
  mean_size /= gt.hyper.n_latents;
  std::cout << "command=synth out=" << opt.out << " n_cells=" << gt.hyper.n_cells
            << " n_latents=" << gt.hyper.n_latents << " q=" << fmt_g17(gt.params.q_active())
            << " mean_assembly_size=" << fmt_g17(mean_size) << "\n";
  return 0;
}

struct GenOptions {
  std::string gt_path;
  int count = 0;
  std::uint64_t seed = 0;
  std::string out;
};

inline int cmd_gen(const GenOptions& opt) {
  const GroundTruth gt = load_ground_truth(opt.gt_path);
  Rng rng(opt.seed);
  const LabeledDataset ds = generate_dataset(gt, opt.count, rng);
  save_dataset(opt.out, ds);
  double mean_z = 0.0, mean_y = 0.0;
  for (const auto& z : ds.latents) mean_z += z.cardinality();
  for (const auto& y : ds.words) mean_y += y.count();
  mean_z /= std::max<std::size_t>(ds.words.size(), 1);
  mean_y /= std::max<std::size_t>(ds.words.size(), 1);
  std::cout << "command=gen out=" << opt.out << " words=" << ds.words.size()
            << " mean_latents_active=" << fmt_g17(mean_z)
            << " mean_word_length=" << fmt_g17(mean_y) << "\n";
  return 0;
}

struct BinOptions {
  std::string events;
  double bin_ms = 5.0;
  double step_ms = 1.0;
  std::string out;
};

inline int cmd_bin(const BinOptions& opt) {
  const SpikeEventFile events = load_events(opt.events);
  const BinnedCorpus corpus = bin_events(events, opt.bin_ms, opt.step_ms);
  save_corpus(opt.out, corpus);
  std::cout << "command=bin out=" << opt.out << " n_cells=" << corpus.n_cells
            << " words=" << corpus.words.size() << " bin_ms=" << fmt_g17(corpus.bin_ms)
            << " step_ms=" << fmt_g17(corpus.step_ms) << " source_digest=" << corpus.source_digest
            << "\n";
  return 0;
}

struct TrainOptions {
  std::string data;
  int n_latents = 0;  // 0 selects M = N
  LearnConfig cfg;
  std::string out;
};

inline int cmd_train(const TrainOptions& opt) {
  const WordSource src = load_word_source(opt.data);
  const int m = opt.n_latents > 0 ? opt.n_latents : src.n_cells;
  const TrainResult result = train(src.words, m, opt.cfg);

  ModelFile mf;
  mf.params = result.model;
  mf.has_he = opt.cfg.prior_kind == PriorKind::homeostatic_egalitarian;
  if (mf.has_he) mf.he = result.he;
  mf.cfg = opt.cfg;
  mf.trace = result.trace;
  save_model(opt.out, mf);

  for (std::size_t p = 0; p < result.trace.pass_mean_log_joint.size(); ++p) {
    std::cout << "pass=" << p << " mean_log_joint=" << fmt_g17(result.trace.pass_mean_log_joint[p])
              << "\n";
  }
  int used = 0;
  for (std::int64_t u : result.trace.usage) used += u > 0;
  std::cout << "command=train out=" << opt.out << " words=" << src.words.size()
            << " n_cells=" << src.n_cells << " n_latents=" << m
            << " prior=" << to_string(opt.cfg.prior_kind) << " latents_used=" << used << "\n";
  return 0;
}

struct InferOptions {
  std::string model;
  std::string data;
  std::string out;
  int threads = 0;
  int i0 = -1;    // < 0 keeps the value stored in the model file
  int imax = -1;
};

inline int cmd_infer(const InferOptions& opt) {
  const ModelFile mf = load_model(opt.model);
  const WordSource src = load_word_source(opt.data);
  if (src.n_cells != mf.params.n_cells) {
    throw DataError("model expects n_cells=" + std::to_string(mf.params.n_cells) +
                    " but data has n_cells=" + std::to_string(src.n_cells));
  }
  InferenceConfig icfg = mf.cfg.inference_config();
  if (opt.i0 >= 0) icfg.i0 = opt.i0;
  if (opt.imax > 0) icfg.imax = opt.imax;
  const PriorContext ctx = mf.has_he ? PriorContext::homeostatic(mf.he) : PriorContext::binomial();

  AssignmentFile out;
  out.n_latents = mf.params.n_latents;
  out.n_trials = src.n_trials;
  out.duration_ms = src.duration_ms;
  out.has_stamps = src.has_stamps;
  out.stamps = src.stamps;
  out.latents.assign(src.words.size(), LatentVector(mf.params.n_latents));
  parallel_for(src.words.size(), opt.threads, [&](std::size_t w) {
    out.latents[w] = greedy_infer(mf.params, src.words[w], icfg, ctx);
  });
  save_assignments(opt.out, out);

  std::int64_t active_words = 0;
  for (const auto& z : out.latents) active_words += z.cardinality() > 0;
  std::cout << "command=infer out=" << opt.out << " words=" << out.latents.size()
            << " words_with_active_latents=" << active_words << "\n";
  return 0;
}

struct MomentsOptions {
  std::string data;
  std::string out;
};

inline int cmd_moments(const MomentsOptions& opt) {
  const WordSource src = load_word_source(opt.data);
  const MomentSummary s = moments(src.words);
  save_moments_csv(opt.out, s);
  double mean_len = 0.0;
  for (std::size_t k = 0; k < s.word_length_pdf.size(); ++k) mean_len += static_cast<double>(k) * s.word_length_pdf[k];
  std::cout << "command=moments out=" << opt.out << " words=" << s.n_words
            << " n_cells=" << s.n_cells << " mean_word_length=" << fmt_g17(mean_len) << "\n";
  return 0;
}

struct FitOptions {
  std::string target;
  HyperGridSpec grid;
  std::string k, k_min, k_max, c, c_min, c_max, mu_p, sigma_p, mu_r, sigma_r, sigma_q;
  int words_per_eval = 50000;
  std::uint64_t seed = 0;
  QQWeights weights;
  std::string out;
};

inline int cmd_fit(FitOptions opt) {
  const MomentSummary target = load_moments_csv(opt.target);
  opt.grid.k = parse_int_list(opt.k);
  opt.grid.k_min = parse_int_list(opt.k_min);
  opt.grid.k_max = parse_int_list(opt.k_max);
  opt.grid.c = parse_int_list(opt.c);
  opt.grid.c_min = parse_int_list(opt.c_min);
  opt.grid.c_max = parse_int_list(opt.c_max);
  opt.grid.mu_p = parse_double_list(opt.mu_p);
  opt.grid.sigma_p = parse_double_list(opt.sigma_p);
  opt.grid.mu_r = parse_double_list(opt.mu_r);
  opt.grid.sigma_r = parse_double_list(opt.sigma_r);
  opt.grid.sigma_q = parse_double_list(opt.sigma_q);
  const std::vector<SynthHyperparams> grid = opt.grid.expand();
  const FitResult fit = fit_hyperparams(target, grid, opt.words_per_eval, opt.seed, opt.weights);

  if (!opt.out.empty()) {
    std::ostringstream csv;
    csv << "# blv-fit v1\n";
    csv << "index,chosen,k,k_min,k_max,c,c_min,c_max,mu_p,sigma_p,mu_r,sigma_r,sigma_q,"
           "qq_length,qq_mean,qq_pair,combined\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& h = grid[i];
      const auto& r = fit.reports[i];
      csv << i << ',' << (static_cast<int>(i) == fit.best_index ? 1 : 0) << ',' << h.k << ','
          << h.k_min << ',' << h.k_max << ',' << h.c << ',' << h.c_min << ',' << h.c_max << ','
          << fmt_g17(h.mu_p) << ',' << fmt_g17(h.sigma_p) << ',' << fmt_g17(h.mu_r) << ','
          << fmt_g17(h.sigma_r) << ',' << fmt_g17(h.sigma_q) << ',' << fmt_g17(r.qq_length) << ','
          << fmt_g17(r.qq_mean) << ',' << fmt_g17(r.qq_pair) << ',' << fmt_g17(r.combined) << '\n';
    }
    blv::detail::write_file_bytes(opt.out, csv.str());
  }
  std::cout << "command=fit best_index=" << fit.best_index << " k=" << fit.best.k
            << " c=" << fit.best.c << " mu_p=" << fmt_g17(fit.best.mu_p)
            << " qq_length=" << fmt_g17(fit.best_report.qq_length)
            << " qq_mean=" << fmt_g17(fit.best_report.qq_mean)
            << " qq_pair=" << fmt_g17(fit.best_report.qq_pair)
            << " combined=" << fmt_g17(fit.best_report.combined) << "\n";
  return 0;
}

struct MatchOptions {
  std::vector<std::string> files;
  std::string out;
  std::string report;
};

inline int cmd_match(const MatchOptions& opt) {
  if (opt.files.size() < 2) throw DataError("match: need at least two model files");
  std::vector<ModelParams> models;
  models.reserve(opt.files.size());
  for (const auto& f : opt.files) models.push_back(load_any_params(f));
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (models[i].n_cells != models[0].n_cells || models[i].n_latents != models[0].n_latents) {
      throw DataError("match: " + opt.files[i] + " has dimensions " +
                      std::to_string(models[i].n_cells) + "x" + std::to_string(models[i].n_latents) +
                      " but " + opt.files[0] + " has " + std::to_string(models[0].n_cells) + "x" +
                      std::to_string(models[0].n_latents));
    }
  }
  if (!opt.report.empty() && opt.files.size() != 2) {
    throw DataError("match: --report requires exactly two input files");
  }

  std::ostringstream csv;
  csv << "# blv-match v1\n";
  csv << "record,model_a,model_b,a,b,value\n";
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      const MatchReport rep = match_assemblies(models[i].p_matrix(), models[j].p_matrix());
      // ids are basenames so reports stay byte-identical across directories
      const std::string ida = std::filesystem::path(opt.files[i]).filename().string();
      const std::string idb = std::filesystem::path(opt.files[j]).filename().string();
      csv << "delta_cs," << ida << ',' << idb << ",,," << fmt_g17(rep.delta_cs) << '\n';
      csv << "mean_matched," << ida << ',' << idb << ",,," << fmt_g17(rep.mean_matched()) << '\n';
      csv << "mean_diag," << ida << ',' << idb << ",,," << fmt_g17(rep.mean_diag()) << '\n';
      for (std::size_t a = 0; a < rep.assignment.size(); ++a) {
        csv << "matched," << ida << ',' << idb << ',' << a << ',' << rep.assignment[a] << ','
            << fmt_g17(rep.matched_cs[a]) << '\n';
      }
      std::cout << "pair a=" << ida << " b=" << idb << " delta_cs=" << fmt_g17(rep.delta_cs)
                << " mean_matched=" << fmt_g17(rep.mean_matched())
                << " mean_diag=" << fmt_g17(rep.mean_diag()) << "\n";
      if (!opt.report.empty()) {
        save_match_report(opt.report, MatchFile{ida, idb, rep});
      }
    }
  }
  if (!opt.out.empty()) blv::detail::write_file_bytes(opt.out, csv.str());
  return 0;
}

struct MetricsOptions {
  std::string model;
  std::string assignments;
  std::string data;
  std::string null_rates;
  std::vector<std::string> partners;  // model.blv:assignments.csv
  std::string cell_types;
  std::string type_pair;
  double psth_bin_ms = 50.0;
  std::string delta_bins = "1,10,50,100";
  std::string out;
};

// PSTH of one latent unit's activations at the given bin width
inline std::vector<double> latent_psth(const AssignmentFile& a, int latent, double bin_ms) {
  EventTrace trace;
  trace.n_trials = a.n_trials;
  trace.duration_ms = a.duration_ms;
  for (std::size_t w = 0; w < a.latents.size(); ++w) {
    if (a.latents[w].bits[static_cast<std::size_t>(latent)]) trace.events.push_back(a.stamps[w]);
  }
  return psth(trace, bin_ms);
}

inline int cmd_metrics(const MetricsOptions& opt) {
  const ModelFile mf = load_model(opt.model);
  const AssignmentFile assign = load_assignments(opt.assignments);
  const int m = mf.params.n_latents;
  if (assign.n_latents != m) {
    throw DataError("metrics: assignments have n_latents=" + std::to_string(assign.n_latents) +
                    " but model has " + std::to_string(m));
  }
  const Matrix strengths = mf.params.membership_strengths();

  // partner models with their own assignment tables, for cross-validation R_X
  struct Partner {
    ModelParams params;
    AssignmentFile assign;
    MatchReport match;
  };
  std::vector<Partner> partners;
  for (const auto& spec : opt.partners) {
    const auto colon = spec.rfind(':');
    if (colon == std::string::npos) {
      throw DataError("metrics: partner spec '" + spec + "' must be model.blv:assignments.csv");
    }
    Partner p;
    p.params = load_any_params(spec.substr(0, colon));
    p.assign = load_assignments(spec.substr(colon + 1));
    if (p.params.n_latents != m || p.params.n_cells != mf.params.n_cells) {
      throw DataError("metrics: partner model dimensions do not match");
    }
    if (p.assign.n_latents != m) throw DataError("metrics: partner assignments do not match");
    p.match = match_assemblies(mf.params.p_matrix(), p.params.p_matrix());
    partners.push_back(std::move(p));
  }

  // optional cell-type labels for the heterogeneity metric
  std::vector<std::string> types;
  std::string type1, type2;
  if (!opt.cell_types.empty()) {
    types = load_cell_types(opt.cell_types, mf.params.n_cells);
    const auto parts = blv::detail::split(opt.type_pair, ',');
    if (parts.size() != 2) throw DataError("metrics: --type-pair must be 'typeA,typeB'");
    type1 = blv::detail::strip(parts[0]);
    type2 = blv::detail::strip(parts[1]);
  }

  // optional null-rate table for delta-P_y, plus the observed words
  const std::vector<int> delta_bins = parse_int_list(opt.delta_bins);
  NullRateTable null_table;
  WordSource words;
  const bool with_null = !opt.null_rates.empty();
  if (with_null) {
    if (opt.data.empty()) throw DataError("metrics: --null-rates requires --data for the observed words");
    null_table = load_null_rates(opt.null_rates);
    words = load_word_source(opt.data);
    if (words.n_cells != mf.params.n_cells) throw DataError("metrics: data n_cells does not match model");
    if (null_table.n_cells != mf.params.n_cells) throw DataError("metrics: null-rate n_cells does not match model");
    if (words.words.size() != assign.latents.size()) {
      throw DataError("metrics: data word count does not match assignments");
    }
  }

  // per-time-bin base of the null log-probability and per-cell log odds
  std::vector<double> null_base;
  Matrix null_logit;
  if (with_null) {
    const auto bins = null_table.rates.size();
    null_base.resize(bins);
    null_logit = Matrix(static_cast<int>(bins), mf.params.n_cells);
    constexpr double eps = 1e-12;
    for (std::size_t t = 0; t < bins; ++t) {
      double base = 0.0;
      for (int i = 0; i < mf.params.n_cells; ++i) {
        const double r = std::clamp(null_table.rates[t][static_cast<std::size_t>(i)], eps, 1.0 - eps);
        base += std::log1p(-r);
        null_logit(static_cast<int>(t), i) = std::log(r) - std::log1p(-r);
      }
      null_base[t] = base;
    }
  }

  std::ostringstream csv;
  csv << "# blv-metrics v1\n";
  csv << "assembly,size,usage,members,crispness,cs_m,cs_t,r_x,count_type1,count_type2,h";
  for (int b : delta_bins) csv << ",dpy_" << b << "ms";
  csv << '\n';

  std::vector<std::int64_t> usage(static_cast<std::size_t>(m), 0);
  for (const auto& z : assign.latents) {
    for (int a = 0; a < m; ++a) usage[static_cast<std::size_t>(a)] += z.bits[static_cast<std::size_t>(a)];
  }

  for (int a = 0; a < m; ++a) {
    const std::vector<double> col = strengths.column(a);
    const MemberSet members = determine_members(col);
    csv << a << ',' << members.members.size() << ',' << usage[static_cast<std::size_t>(a)] << ',';
    for (std::size_t j = 0; j < members.members.size(); ++j) {
      if (j) csv << ' ';
      csv << members.members[j];
    }
    csv << ',';
    if (!members.members.empty() && members.members.size() < col.size()) {
      csv << fmt_g17(crispness(col, members));
    }
    csv << ',';

    if (!partners.empty()) {
      double cs_m_sum = 0.0, cs_t_sum = 0.0;
      const std::vector<double> own = latent_psth(assign, a, opt.psth_bin_ms);
      for (const auto& p : partners) {
        cs_m_sum += p.match.matched_cs[static_cast<std::size_t>(a)];
        const int matched = p.match.assignment[static_cast<std::size_t>(a)];
        std::vector<double> theirs = latent_psth(p.assign, matched, opt.psth_bin_ms);
        // PSTHs from different corpora can differ in bin count by rounding
        const std::size_t nb = std::min(own.size(), theirs.size());
        cs_t_sum += cosine_similarity(std::vector<double>(own.begin(), own.begin() + nb),
                                      std::vector<double>(theirs.begin(), theirs.begin() + nb));
      }
      const double cs_m = cs_m_sum / static_cast<double>(partners.size());
      const double cs_t = cs_t_sum / static_cast<double>(partners.size());
      csv << fmt_g17(cs_m) << ',' << fmt_g17(cs_t) << ',' << fmt_g17(robustness(cs_m, cs_t));
    } else {
      csv << ",,";
    }
    csv << ',';

    if (!types.empty()) {
      int c1 = 0, c2 = 0;
      for (int cell : members.members) {
        if (types[static_cast<std::size_t>(cell)] == type1) ++c1;
        if (types[static_cast<std::size_t>(cell)] == type2) ++c2;
      }
      csv << c1 << ',' << c2 << ',';
      if (c1 + c2 > 0) csv << fmt_g17(heterogeneity(c1, c2));
    } else {
      csv << ",,";
    }

    if (with_null) {
      // words observed while this unit was active, deduplicated
      std::map<std::vector<std::uint8_t>, int> dedup;
      std::int64_t n_active = 0;
      for (std::size_t w = 0; w < assign.latents.size(); ++w) {
        if (assign.latents[w].bits[static_cast<std::size_t>(a)]) {
          ++dedup[words.words[w].bits];
          ++n_active;
        }
      }
      const std::size_t bins = null_table.rates.size();
      std::vector<double> null_trace(bins, 0.0);
      if (n_active > 0) {
        for (std::size_t t = 0; t < bins; ++t) {
          double mean_p = 0.0;
          for (const auto& [bits, count] : dedup) {
            double lp = null_base[t];
            for (std::size_t i = 0; i < bits.size(); ++i) {
              if (bits[i]) lp += null_logit(static_cast<int>(t), static_cast<int>(i));
            }
            mean_p += count * std::exp(lp);
          }
          null_trace[t] = mean_p / static_cast<double>(n_active);
        }
      }
      // PSTH of the unit at the null table's base resolution
      EventTrace trace;
      trace.n_trials = assign.n_trials;
      trace.duration_ms = static_cast<double>(bins) * null_table.bin_ms;
      for (std::size_t w = 0; w < assign.latents.size(); ++w) {
        if (assign.latents[w].bits[static_cast<std::size_t>(a)] && assign.stamps[w].second < trace.duration_ms) {
          trace.events.push_back(assign.stamps[w]);
        }
      }
      std::vector<double> unit_trace = psth(trace, null_table.bin_ms);
      unit_trace.resize(bins, 0.0);
      for (int b : delta_bins) csv << ',' << fmt_g17(delta_py(unit_trace, null_trace, b));
    } else {
      for (std::size_t b = 0; b < delta_bins.size(); ++b) csv << ',';
    }
    csv << '\n';
  }

  blv::detail::write_file_bytes(opt.out, csv.str());
  std::cout << "command=metrics out=" << opt.out << " assemblies=" << m
            << " partners=" << partners.size() << " delta_py=" << (with_null ? "yes" : "no") << "\n";
  return 0;
}

struct CoactivityOptions {
  std::string assignments;
  std::string out;
};

inline int cmd_coactivity(const CoactivityOptions& opt) {
  const AssignmentFile assign = load_assignments(opt.assignments);
  const CoactivityStats stats = coactivity_stats(assign.latents);
  std::ostringstream csv;
  csv << "# blv-coactivity v1\n";
  csv << "record,a,b,value\n";
  const int m = assign.n_latents;
  for (int a = 0; a < m; ++a) {
    csv << "count," << a << ",," << (stats.counts.empty() ? 0 : stats.counts[static_cast<std::size_t>(a)]) << '\n';
  }
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      csv << "pair," << a << ',' << b << ','
          << (stats.pair_counts.rows ? static_cast<std::int64_t>(stats.pair_counts(a, b)) : 0) << '\n';
    }
  }
  blv::detail::write_file_bytes(opt.out, csv.str());
  std::cout << "command=coactivity out=" << opt.out << " words=" << assign.latents.size() << "\n";
  return 0;
}

struct ExportOptions {
  std::string input;
  std::string out;
};

inline void export_params_csv(std::ostringstream& csv, const ModelParams& p) {
  for (int i = 0; i < p.n_cells; ++i) {
    for (int a = 0; a < p.n_latents; ++a) {
      csv << "p," << i << ',' << a << ',' << fmt_g17(p.p_silence(i, a)) << '\n';
    }
  }
  for (int i = 0; i < p.n_cells; ++i) csv << "r," << i << ",," << fmt_g17(p.r_silence(i)) << '\n';
  csv << "q,,," << fmt_g17(p.q_active()) << '\n';
}

inline int cmd_export(const ExportOptions& opt) {
  const FileKind kind = peek_kind(opt.input);
  std::ostringstream csv;
  switch (kind) {
    case FileKind::model: {
      const ModelFile mf = load_model(opt.input);
      csv << "# blv-export model v1\n";
      csv << "record,i,a,value\n";
      export_params_csv(csv, mf.params);
      for (std::size_t p = 0; p < mf.trace.pass_mean_log_joint.size(); ++p) {
        csv << "pass_mean_log_joint," << p << ",," << fmt_g17(mf.trace.pass_mean_log_joint[p]) << '\n';
      }
      for (std::size_t a = 0; a < mf.trace.usage.size(); ++a) {
        csv << "usage," << a << ",," << mf.trace.usage[a] << '\n';
      }
      if (mf.has_he) {
        for (std::size_t a = 0; a < mf.he.rates.size(); ++a) {
          csv << "he_rate," << a << ",," << fmt_g17(mf.he.rates[a]) << '\n';
        }
      }
      break;
    }
    case FileKind::ground_truth: {
      const GroundTruth gt = load_ground_truth(opt.input);
      csv << "# blv-export ground_truth v1\n";
      csv << "record,i,a,value\n";
      export_params_csv(csv, gt.params);
      for (int i = 0; i < gt.hyper.n_cells; ++i) {
        for (int a = 0; a < gt.hyper.n_latents; ++a) {
          csv << "s," << i << ',' << a << ',' << (gt.member(i, a) ? 1 : 0) << '\n';
        }
      }
      break;
    }
    case FileKind::dataset: {
      const LabeledDataset ds = load_dataset(opt.input);
      csv << "# blv-export dataset v1\n";
      csv << "word_index,latent_actives,cell_actives\n";
      for (std::size_t w = 0; w < ds.words.size(); ++w) {
        csv << w << ',';
        bool first = true;
        for (int a = 0; a < ds.latents[w].size(); ++a) {
          if (ds.latents[w].bits[static_cast<std::size_t>(a)]) {
            if (!first) csv << ' ';
            csv << a;
            first = false;
          }
        }
        csv << ',';
        first = true;
        for (int i = 0; i < ds.words[w].size(); ++i) {
          if (ds.words[w].bits[static_cast<std::size_t>(i)]) {
            if (!first) csv << ' ';
            csv << i;
            first = false;
          }
        }
        csv << '\n';
      }
      break;
    }
    case FileKind::corpus: {
      const BinnedCorpus c = load_corpus(opt.input);
      csv << "# blv-export corpus v1\n";
      csv << "word_index,trial,t_ms,cell_actives\n";
      for (std::size_t w = 0; w < c.words.size(); ++w) {
        const int trial = c.has_stamps ? c.stamps[w].first : 0;
        const double t = c.has_stamps ? c.stamps[w].second : static_cast<double>(w);
        csv << w << ',' << trial << ',' << fmt_g17(t) << ',';
        bool first = true;
        for (int i = 0; i < c.words[w].size(); ++i) {
          if (c.words[w].bits[static_cast<std::size_t>(i)]) {
            if (!first) csv << ' ';
            csv << i;
            first = false;
          }
        }
        csv << '\n';
      }
      break;
    }
    case FileKind::match_report: {
      const MatchFile mfi = load_match_report(opt.input);
      csv << "# blv-export match v1\n";
      csv << "record,a,b,value\n";
      csv << "delta_cs,,," << fmt_g17(mfi.report.delta_cs) << '\n';
      for (std::size_t a = 0; a < mfi.report.assignment.size(); ++a) {
        csv << "matched," << a << ',' << mfi.report.assignment[a] << ','
            << fmt_g17(mfi.report.matched_cs[a]) << '\n';
        csv << "diag," << a << ',' << a << ',' << fmt_g17(mfi.report.unmatched_diag_cs[a]) << '\n';
      }
      break;
    }
  }
  blv::detail::write_file_bytes(opt.out, csv.str());
  std::cout << "command=export out=" << opt.out << " kind=" << static_cast<int>(kind) << "\n";
  return 0;
}

}  // namespace detail

// Builds the CLI and runs one invocation; args excludes the program name.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric/guard error.
inline int run(std::vector<std::string> args) {
  CLI::App app{"cell-assembly detection in sparse binary data (noisy-OR latent variable model)"};
  app.require_subcommand(1);

  detail::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a ground-truth model");
  detail::add_hyper_options(synth_cmd, synth.hyper);
  synth_cmd->add_option("--swap-iters", synth.swap_iters, "membership swap iterations (-1: 50*M)");
  synth_cmd->add_option("--seed", synth.seed, "random seed");
  synth_cmd->add_option("-o,--out", synth.out, "output ground-truth file")->required();

  detail::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a labeled dataset from a ground truth");
  gen_cmd->add_option("--gt", gen.gt_path, "ground-truth file")->required();
  gen_cmd->add_option("--count", gen.count, "number of (z, y) pairs")->required();
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("-o,--out", gen.out, "output dataset file")->required();

  detail::BinOptions bin;
  auto* bin_cmd = app.add_subcommand("bin", "bin a spike-event file into spike-words");
  bin_cmd->add_option("--events", bin.events, "spike-event text file")->required();
  bin_cmd->add_option("--bin-ms", bin.bin_ms, "window width in ms");
  bin_cmd->add_option("--step-ms", bin.step_ms, "window step in ms");
  bin_cmd->add_option("-o,--out", bin.out, "output corpus file")->required();

  detail::TrainOptions tr;
  std::string tr_prior = "binomial", tr_order = "shuffled";
  auto* train_cmd = app.add_subcommand("train", "train a model on a corpus or dataset");
  train_cmd->add_option("--data", tr.data, "corpus or dataset file")->required();
  train_cmd->add_option("--m", tr.n_latents, "latent dimension (default: n_cells)");
  train_cmd->add_option("--passes", tr.cfg.n_passes, "training passes over the corpus");
  train_cmd->add_option("--lr", tr.cfg.learning_rate, "learning rate");
  train_cmd->add_option("--lr-decay", tr.cfg.lr_decay, "per-pass learning-rate multiplier");
  train_cmd->add_option("--prior", tr_prior, "latent prior: binomial|he");
  train_cmd->add_option("--order", tr_order, "sample order: shuffled|sequential");
  train_cmd->add_option("--seed", tr.cfg.rng_seed, "random seed");
  train_cmd->add_option("--init-silence", tr.cfg.init_silence, "initial P/R probability level");
  train_cmd->add_option("--init-jitter", tr.cfg.init_jitter_sd, "logistic-space init jitter sd");
  train_cmd->add_option("--q-init", tr.cfg.q_init, "initial Q (<=0: 1/M)");
  train_cmd->add_option("--i0", tr.cfg.i0, "below-zero candidates admitted to inference pool");
  train_cmd->add_option("--imax", tr.cfg.imax, "inference pool cap");
  train_cmd->add_option("-o,--out", tr.out, "output model file")->required();

  detail::InferOptions inf;
  auto* infer_cmd = app.add_subcommand("infer", "infer latent activations for every word");
  infer_cmd->add_option("--model", inf.model, "model file")->required();
  infer_cmd->add_option("--data", inf.data, "corpus or dataset file")->required();
  infer_cmd->add_option("--threads", inf.threads, "worker threads (0: all cores)");
  infer_cmd->add_option("--i0", inf.i0, "override stored i0");
  infer_cmd->add_option("--imax", inf.imax, "override stored imax");
  infer_cmd->add_option("-o,--out", inf.out, "output assignments csv")->required();

  detail::MomentsOptions mom;
  auto* mom_cmd = app.add_subcommand("moments", "spike-word moment summary of a corpus");
  mom_cmd->add_option("--data", mom.data, "corpus or dataset file")->required();
  mom_cmd->add_option("-o,--out", mom.out, "output moments csv")->required();

  detail::FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "grid-search synthesis hyperparameters to target moments");
  fit_cmd->add_option("--target", fit.target, "target moments csv")->required();
  fit_cmd->add_option("--n", fit.grid.n_cells, "number of cells")->required();
  fit_cmd->add_option("--m", fit.grid.n_latents, "number of latents")->required();
  fit_cmd->add_option("--grid-k", fit.k, "comma list of k values");
  fit_cmd->add_option("--grid-k-min", fit.k_min, "comma list of k_min values");
  fit_cmd->add_option("--grid-k-max", fit.k_max, "comma list of k_max values");
  fit_cmd->add_option("--grid-c", fit.c, "comma list of c values");
  fit_cmd->add_option("--grid-c-min", fit.c_min, "comma list of c_min values");
  fit_cmd->add_option("--grid-c-max", fit.c_max, "comma list of c_max values");
  fit_cmd->add_option("--grid-mu-p", fit.mu_p, "comma list of mu_p values");
  fit_cmd->add_option("--grid-sigma-p", fit.sigma_p, "comma list of sigma_p values");
  fit_cmd->add_option("--grid-mu-r", fit.mu_r, "comma list of mu_r values");
  fit_cmd->add_option("--grid-sigma-r", fit.sigma_r, "comma list of sigma_r values");
  fit_cmd->add_option("--grid-sigma-q", fit.sigma_q, "comma list of sigma_q values");
  fit_cmd->add_option("--words-per-eval", fit.words_per_eval, "words generated per lattice point");
  fit_cmd->add_option("--seed", fit.seed, "random seed");
  fit_cmd->add_option("--w-length", fit.weights.length, "weight of the word-length QQ term");
  fit_cmd->add_option("--w-mean", fit.weights.mean, "weight of the cell-mean QQ term");
  fit_cmd->add_option("--w-pair", fit.weights.pair, "weight of the coactivity QQ term");
  fit_cmd->add_option("-o,--out", fit.out, "output per-point csv");

  detail::MatchOptions match;
  auto* match_cmd = app.add_subcommand("match", "match assemblies across two or more models");
  match_cmd->add_option("files", match.files, "model or ground-truth files")->expected(2, -1);
  match_cmd->add_option("-o,--out", match.out, "output match csv");
  match_cmd->add_option("--report", match.report, "binary match-report output (two files only)");

  detail::MetricsOptions met;
  auto* met_cmd = app.add_subcommand("metrics", "per-assembly metric table");
  met_cmd->add_option("--model", met.model, "model file")->required();
  met_cmd->add_option("--assignments", met.assignments, "assignments csv from `infer`")->required();
  met_cmd->add_option("--data", met.data, "corpus/dataset (needed with --null-rates)");
  met_cmd->add_option("--null-rates", met.null_rates, "per-cell per-bin null firing-rate table");
  met_cmd->add_option("--partner", met.partners, "partner model.blv:assignments.csv (repeatable)");
  met_cmd->add_option("--cell-types", met.cell_types, "cell,type csv for heterogeneity");
  met_cmd->add_option("--type-pair", met.type_pair, "typeA,typeB for heterogeneity");
  met_cmd->add_option("--psth-bin-ms", met.psth_bin_ms, "PSTH bin for temporal similarity");
  met_cmd->add_option("--delta-bins", met.delta_bins, "comma list of delta-P_y bin widths (ms)");
  met_cmd->add_option("-o,--out", met.out, "output metrics csv")->required();

  detail::CoactivityOptions coact;
  auto* coact_cmd = app.add_subcommand("coactivity", "latent activation and co-activation counts");
  coact_cmd->add_option("--assignments", coact.assignments, "assignments csv")->required();
  coact_cmd->add_option("-o,--out", coact.out, "output csv")->required();

  detail::ExportOptions exp;
  auto* export_cmd = app.add_subcommand("export", "export any binary artifact as a delimited table");
  export_cmd->add_option("--input", exp.input, "binary artifact file")->required();
  export_cmd->add_option("-o,--out", exp.out, "output csv")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return detail::cmd_synth(synth);
    if (gen_cmd->parsed()) return detail::cmd_gen(gen);
    if (bin_cmd->parsed()) return detail::cmd_bin(bin);
    if (train_cmd->parsed()) {
      tr.cfg.prior_kind = detail::parse_prior(tr_prior);
      if (tr_order == "shuffled") {
        tr.cfg.sample_order = SampleOrder::shuffled;
      } else if (tr_order == "sequential") {
        tr.cfg.sample_order = SampleOrder::sequential;
      } else {
        std::cerr << "error: --order must be shuffled|sequential\n";
        return 1;
      }
      return detail::cmd_train(tr);
    }
    if (infer_cmd->parsed()) return detail::cmd_infer(inf);
    if (mom_cmd->parsed()) return detail::cmd_moments(mom);
    if (fit_cmd->parsed()) return detail::cmd_fit(fit);
    if (match_cmd->parsed()) return detail::cmd_match(match);
    if (met_cmd->parsed()) return detail::cmd_metrics(met);
    if (coact_cmd->parsed()) return detail::cmd_coactivity(coact);
    if (export_cmd->parsed()) return detail::cmd_export(exp);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

inline int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace blv::cli
