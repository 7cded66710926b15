// plan: command-line driver for map generation, sample collection, training,
// evaluation, the online loop and the collection-efficiency benchmark.
//
// Exit codes: 0 success, 2 validation error, 3 I/O error.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <type_traits>
#include <vector>

#include "loha/harness.hpp"

using namespace loha;
using namespace loha::harness;

namespace {

struct Common {
  std::string domain = "car4d";
  std::string map_dir;
  std::string out;
  int K = 4;
  double w = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t expansion_limit = 2000000;
  ProblemArgs problems;
  std::string rule = "weighted";
};

struct Training {
  TrainConfig train;
  DataConfig data;
  std::string optimizer = "adam";
  bool no_alpha = false;
};

void add_maps(CLI::App* c, Common& o) {
  c->add_option("--domain", o.domain, "grid2d or car4d")->capture_default_str()->check(CLI::IsMember({"grid2d", "car4d"}));
  c->add_option("--map-dir", o.map_dir, "directory of .map files")->required();
}

void add_problems(CLI::App* c, Common& o, std::size_t count) {
  o.problems.count = count;
  c->add_option("--problems", o.problems.file, "JSONL problem file (default: sample problems)");
  c->add_option("--num-problems", o.problems.count, "problems to sample")->capture_default_str();
  c->add_option("--min-distance", o.problems.min_distance, "sampled start-goal distance, cells")->capture_default_str();
  c->add_option("--max-distance", o.problems.max_distance)->capture_default_str();
  c->add_option("--seed", o.seed, "root seed")->capture_default_str();
  c->add_option("--expansion-limit", o.expansion_limit)->capture_default_str();
}

void add_training(CLI::App* c, Training& t) {
  c->add_option("--epochs", t.train.epochs)->capture_default_str();
  c->add_option("--lr", t.train.learning_rate)->capture_default_str();
  c->add_option("--batch-size", t.train.batch_size)->capture_default_str();
  c->add_option("--hidden", t.train.hidden, "hidden layer widths")->delimiter(',')->capture_default_str();
  c->add_option("--optimizer", t.optimizer)->capture_default_str()->check(CLI::IsMember({"adam", "sgd"}));
  c->add_flag("--no-alpha", t.no_alpha, "train every sample at weight 1");
  c->add_option("--incomplete-ratio", t.data.incomplete_ratio, "incomplete samples kept per complete one; < 0 keeps all")
      ->capture_default_str();
  c->add_option("--max-samples", t.data.max_samples, "0 = no cap")->capture_default_str();
  c->add_flag("--augment", t.data.augment, "add the 8 grid symmetries");
}

void finish_training(Training& t, std::uint64_t seed) {
  t.train.optimizer = t.optimizer == "adam" ? Optimizer::Adam : Optimizer::Sgd;
  t.train.use_alpha = !t.no_alpha;
  t.train.seed = derive_seed(seed, "train");
  t.data.seed = derive_seed(seed, "data");
}

/// Hash of the subcommand and every option value except output paths, so the
/// same flags written to a different place give identical files.
std::string hash_of(const CLI::App* sub) {
  std::vector<std::pair<std::string, std::string>> items;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "out" || name == "model-out") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    items.emplace_back(name, value);
  }
  return config_hash(sub->get_name(), std::move(items));
}

template <class F>
void with_domain(const std::string& name, F&& f) {
  if (parse_domain(name) == DomainKind::Grid2D)
    f(std::type_identity<Grid2D>{});
  else
    f(std::type_identity<Car4D>{});
}

PlanOptions plan_options(const Common& o) {
  PlanOptions p;
  p.w = o.w;
  p.expansion_limit = o.expansion_limit;
  p.rule = parse_focal_rule(o.rule);
  p.K = o.K;
  return p;
}

void check_common(const Common& o) {
  if (o.K < 1) throw ValidationError("--k must be >= 1");
  if (!(o.w >= 1.0)) throw ValidationError("--w must be >= 1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoHA* planning experiments"};
  app.require_subcommand(1);

  GenMapsArgs gm;
  auto* gen = app.add_subcommand("gen-maps", "generate random-obstacle maps and a manifest");
  gen->add_option("--out", gm.out_dir, "output directory")->required();
  gen->add_option("--count", gm.count)->capture_default_str();
  gen->add_option("--width", gm.width)->capture_default_str();
  gen->add_option("--height", gm.height)->capture_default_str();
  gen->add_option("--density", gm.density)->capture_default_str();
  gen->add_option("--seed", gm.seed)->capture_default_str();

  Common co;
  auto* collect = app.add_subcommand("collect", "solve problems while collecting samples by backtracking");
  add_maps(collect, co);
  add_problems(collect, co, 20);
  collect->add_option("--k", co.K)->capture_default_str();
  collect->add_option("--w", co.w, "search weight")->capture_default_str();
  std::string collect_model;
  collect->add_option("--model", collect_model, "collect with LoHA* guided by this model instead of weighted A*");
  collect->add_option("--rule", co.rule, "focal rule when --model is given")->capture_default_str();
  collect->add_option("--out", co.out, "samples JSONL")->required();

  Common oc;
  std::size_t oracle_states = 50;
  std::uint64_t oracle_cap = 200000;
  auto* oracle = app.add_subcommand("oracle", "label states from global-search trees with the local oracle");
  add_maps(oracle, oc);
  add_problems(oracle, oc, 20);
  oracle->add_option("--k", oc.K)->capture_default_str();
  oracle->add_option("--w", oc.w, "weight of the global search that supplies states")->capture_default_str();
  oracle->add_option("--states-per-problem", oracle_states)->capture_default_str();
  oracle->add_option("--oracle-cap", oracle_cap, "expansion cap per oracle call")->capture_default_str();
  oracle->add_option("--out", oc.out, "samples JSONL")->required();

  Common tc;
  Training tt;
  std::vector<std::string> sample_files;
  auto* trn = app.add_subcommand("train", "train the residual model");
  add_maps(trn, tc);
  trn->add_option("--samples", sample_files, "sample JSONL files")->required();
  trn->add_option("--seed", tc.seed)->capture_default_str();
  add_training(trn, tt);
  trn->add_option("--out", tc.out, "model file")->required();

  Common ec;
  ec.w = 4.0;
  std::string eval_model;
  auto* ev = app.add_subcommand("eval", "compare LoHA* against weighted A* on held-out problems");
  add_maps(ev, ec);
  add_problems(ev, ec, 50);
  ev->add_option("--model", eval_model)->required();
  ev->add_option("--w", ec.w)->capture_default_str();
  ev->add_option("--rule", ec.rule)->capture_default_str();
  ev->add_option("--out", ec.out, "per-problem CSV; the summary goes to <out>.json")->required();

  Common on;
  on.w = 4.0;
  Training ot;
  OnlineConfig ocfg;
  std::size_t num_eval = 20;
  std::string online_model;
  auto* onl = app.add_subcommand("online", "collect with the current model, retrain, repeat");
  add_maps(onl, on);
  onl->add_option("--min-distance", on.problems.min_distance)->capture_default_str();
  onl->add_option("--max-distance", on.problems.max_distance)->capture_default_str();
  onl->add_option("--seed", on.seed)->capture_default_str();
  onl->add_option("--expansion-limit", on.expansion_limit)->capture_default_str();
  onl->add_option("--k", on.K)->capture_default_str();
  onl->add_option("--w", on.w)->capture_default_str();
  onl->add_option("--rule", on.rule)->capture_default_str();
  onl->add_option("--rounds", ocfg.rounds)->capture_default_str();
  onl->add_option("--batch", ocfg.batch_size, "training problems per round")->capture_default_str();
  onl->add_option("--bootstrap-w", ocfg.bootstrap_weight, "weight of the round-0 search (0 = --w)")->capture_default_str();
  onl->add_option("--num-eval", num_eval, "held-out problems")->capture_default_str();
  add_training(onl, ot);
  onl->add_option("--model-out", online_model, "write the final model here");
  onl->add_option("--out", on.out, "per-round CSV")->required();

  Common bc;
  EfficiencyOptions eff;
  auto* bench = app.add_subcommand("bench-efficiency", "expansions per sample: local oracle vs backtracking");
  add_maps(bench, bc);
  add_problems(bench, bc, 5);
  bench->add_option("--k", eff.Ks, "K values")->delimiter(',')->capture_default_str();
  bench->add_option("--w", bc.w, "global search weight")->capture_default_str();
  bench->add_option("--states-per-problem", eff.states_per_problem)->capture_default_str();
  bench->add_option("--oracle-cap", eff.oracle_cap)->capture_default_str();
  bench->add_option("--out", bc.out, "CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      gm.config_hash = hash_of(gen);
      const auto paths = gen_maps(gm);
      std::cout << "wrote " << paths.size() << " maps to " << gm.out_dir << "\n";
    } else if (*collect) {
      check_common(co);
      const std::string hash = hash_of(collect);
      with_domain(co.domain, [&]<class D>(std::type_identity<D>) {
        const auto md = load_map_dir(co.map_dir);
        const auto problems = make_problems<D>(md, co.problems, co.K, co.w, co.seed, "collect-problems");
        std::optional<ResidualModel> model;
        if (!collect_model.empty()) model = ResidualModel::load(collect_model);
        const auto run = collect_samples<D>(md.maps, problems, plan_options(co), model ? &*model : nullptr);
        ensure_parent(co.out);
        write_samples(run.samples, co.out);
        Json meta;
        meta["config_hash"] = hash;
        meta["command"] = "collect";
        meta["domain"] = co.domain;
        meta["K"] = co.K;
        meta["w"] = co.w;
        meta["method"] = model ? "loha" : "wastar";
        meta["samples"] = run.samples.size();
        meta["complete"] = run.complete;
        meta["incomplete"] = run.samples.size() - run.complete;
        meta["collection_expansions"] = run.expansions;
        meta["unsolved"] = run.unsolved;
        meta["samples_hash"] = hex64(samples_hash(run.samples));
        meta["problems"] = problems_json<D>(problems);
        write_json(meta_path(co.out), meta);
        std::cout << "collected " << run.samples.size() << " samples (" << run.complete << " complete) from "
                  << problems.size() << " problems, " << run.expansions << " expansions\n";
      });
    } else if (*oracle) {
      check_common(oc);
      const std::string hash = hash_of(oracle);
      with_domain(oc.domain, [&]<class D>(std::type_identity<D>) {
        const auto md = load_map_dir(oc.map_dir);
        const auto problems = make_problems<D>(md, oc.problems, oc.K, oc.w, oc.seed, "collect-problems");
        const auto run = oracle_samples<D>(md.maps, problems, oc.K, SearchOptions{oc.w, oc.expansion_limit},
                                           oracle_states, oracle_cap, oc.seed);
        ensure_parent(oc.out);
        write_samples(run.samples, oc.out);
        Json meta;
        meta["config_hash"] = hash;
        meta["command"] = "oracle";
        meta["domain"] = oc.domain;
        meta["K"] = oc.K;
        meta["w"] = oc.w;
        meta["samples"] = run.samples.size();
        meta["states"] = run.states;
        meta["dead_ends"] = run.dead_ends;
        meta["capped"] = run.capped;
        meta["collection_expansions"] = run.oracle_expansions;
        meta["global_expansions"] = run.global_expansions;
        meta["samples_hash"] = hex64(samples_hash(run.samples));
        meta["problems"] = problems_json<D>(problems);
        write_json(meta_path(oc.out), meta);
        std::cout << "labelled " << run.samples.size() << " of " << run.states << " states, " << run.oracle_expansions
                  << " oracle expansions\n";
      });
    } else if (*trn) {
      finish_training(tt, tc.seed);
      const std::string hash = hash_of(trn);
      with_domain(tc.domain, [&]<class D>(std::type_identity<D>) {
        const auto md = load_map_dir(tc.map_dir);
        std::vector<Sample> samples;
        std::uint64_t collection = 0;
        for (const auto& f : sample_files) {
          auto part = read_samples(f);
          samples.insert(samples.end(), part.begin(), part.end());
          if (std::filesystem::exists(meta_path(f)))
            collection += read_json(meta_path(f)).value("collection_expansions", std::uint64_t{0});
        }
        const auto tm = train_on_samples<D>(samples, md.maps, tt.train, tt.data);
        ensure_parent(tc.out);
        tm.model.save(tc.out);
        Json meta;
        meta["config_hash"] = hash;
        meta["command"] = "train";
        meta["domain"] = tc.domain;
        meta["K"] = tm.K;
        meta["layer_sizes"] = tm.model.layer_sizes();
        meta["hyperparameters"] = train_config_json(tt.train, tt.data);
        meta["training_set_hash"] = hex64(samples_hash(samples));
        meta["dataset_size"] = samples.size();
        meta["training_rows"] = tm.rows;
        meta["collection_expansions"] = collection;
        meta["sample_files"] = sample_files;
        meta["loss_history"] = tm.loss_history;
        write_json(meta_path(tc.out), meta);
        std::cout << "trained on " << tm.rows << " rows, final loss " << tm.loss_history.back() << "\n";
      });
    } else if (*ev) {
      const std::string hash = hash_of(ev);
      with_domain(ec.domain, [&]<class D>(std::type_identity<D>) {
        const auto model = ResidualModel::load(eval_model);
        ec.K = model_K<D>(model);
        check_common(ec);
        const auto md = load_map_dir(ec.map_dir);
        const auto problems = make_problems<D>(md, ec.problems, ec.K, ec.w, ec.seed, "eval-problems");
        const auto rep = evaluate_model<D>(md.maps, problems, model, plan_options(ec));
        write_text(ec.out, eval_csv(rep, hash));
        Json model_meta;
        if (std::filesystem::exists(meta_path(eval_model))) model_meta = read_json(meta_path(eval_model));
        Json s;
        s["config_hash"] = hash;
        s["command"] = "eval";
        s["domain"] = ec.domain;
        s["K"] = ec.K;
        s["w"] = ec.w;
        s["rule"] = ec.rule;
        s["problems"] = problems.size();
        s["paired"] = rep.paired;
        s["unsolved"] = rep.unsolved;
        s["speedup"] = rep.speedup;
        s["median_cost_ratio"] = median(rep.cost_ratios);
        s["max_cost_ratio"] = rep.cost_ratios.empty() ? 0.0 : *std::max_element(rep.cost_ratios.begin(), rep.cost_ratios.end());
        s["model_hash"] = hex64(fnv1a64(read_text(eval_model)));
        s["training_set_hash"] = model_meta.value("training_set_hash", "");
        s["dataset_size"] = model_meta.value("dataset_size", std::uint64_t{0});
        s["collection_expansions"] = model_meta.value("collection_expansions", std::uint64_t{0});
        write_json(ec.out + ".json", s);
        std::cout << "speedup " << rep.speedup << " over " << rep.paired << " paired problems (" << rep.unsolved
                  << " unsolved)\n";
      });
    } else if (*onl) {
      check_common(on);
      finish_training(ot, on.seed);
      const std::string hash = hash_of(onl);
      ocfg.w = on.w;
      ocfg.K = on.K;
      ocfg.seed = on.seed;
      ocfg.expansion_limit = on.expansion_limit;
      ocfg.rule = parse_focal_rule(on.rule);
      ocfg.train = ot.train;
      ocfg.data = ot.data;
      if (ocfg.batch_size < 1 || ocfg.rounds < 1) throw ValidationError("--batch and --rounds must be >= 1");
      with_domain(on.domain, [&]<class D>(std::type_identity<D>) {
        const auto md = load_map_dir(on.map_dir);
        ProblemArgs tp = on.problems;
        tp.count = static_cast<std::size_t>(ocfg.batch_size) * static_cast<std::size_t>(ocfg.rounds);
        ProblemArgs ep = on.problems;
        ep.count = num_eval;
        const auto training = make_problems<D>(md, tp, on.K, on.w, on.seed, "online-train");
        const auto eval = make_problems<D>(md, ep, on.K, on.w, on.seed, "online-eval");
        ResidualModel model;
        const auto rounds = online_loop<D>(ocfg, md.maps, training, eval, &model);
        std::string csv = "# config_hash=" + hash + "\n";
        csv += "round,dataset_size,collection_expansions,speedup,paired,unsolved,unsolved_training\n";
        for (const auto& r : rounds)
          csv += std::to_string(r.round) + "," + std::to_string(r.dataset_size) + "," +
                 std::to_string(r.collection_expansions) + "," + fmt(r.report.speedup) + "," +
                 std::to_string(r.report.paired) + "," + std::to_string(r.report.unsolved) + "," +
                 std::to_string(r.unsolved_training) + "\n";
        write_text(on.out, csv);
        if (!online_model.empty()) {
          ensure_parent(online_model);
          model.save(online_model);
          Json meta;
          meta["config_hash"] = hash;
          meta["command"] = "online";
          meta["domain"] = on.domain;
          meta["K"] = on.K;
          meta["layer_sizes"] = model.layer_sizes();
          meta["hyperparameters"] = train_config_json(ot.train, ot.data);
          meta["dataset_size"] = rounds.back().dataset_size;
          meta["collection_expansions"] = rounds.back().collection_expansions;
          write_json(meta_path(online_model), meta);
        }
        for (const auto& r : rounds)
          std::cout << "round " << r.round << ": " << r.dataset_size << " samples, speedup " << r.report.speedup << "\n";
      });
    } else if (*bench) {
      const std::string hash = hash_of(bench);
      if (!(bc.w >= 1.0)) throw ValidationError("--w must be >= 1");
      eff.global = SearchOptions{bc.w, bc.expansion_limit};
      eff.seed = bc.seed;
      with_domain(bc.domain, [&]<class D>(std::type_identity<D>) {
        const auto md = load_map_dir(bc.map_dir);
        const auto problems = make_problems<D>(md, bc.problems, eff.Ks.front(), bc.w, bc.seed, "bench-problems");
        const auto rows = bench_efficiency<D>(md.maps, problems, eff);
        write_text(bc.out, efficiency_csv(rows, hash));
        for (const auto& r : rows) std::cout << "K=" << r.K << " " << r.method << " " << r.per_sample << "\n";
      });
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
