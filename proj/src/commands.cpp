#include <fstream>
#include <ostream>

#include "gbml/expcli.hpp"

namespace gbml::expcli {

namespace {

std::filesystem::path prepare_out(const Config& cfg) {
  const auto dir = output_dir(cfg);
  std::filesystem::create_directories(dir);
  return dir;
}

models::MlpParams load_trained(const Config& cfg) {
  const auto path = checkpoint_path(cfg);
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("checkpoint " + path.string() +
                             " not found; run train-sinusoid first or set checkpoint=PATH");
  }
  return models::load_checkpoint(path);
}

std::vector<std::size_t> layer_sizes_of(const models::MlpParams& p) {
  std::vector<std::size_t> sizes{p.input_dim + p.bias_transform_dim()};
  for (const auto& l : p.layers) sizes.push_back(l.weight.rows());
  return sizes;
}

}  // namespace

int cmd_certify(const Config& cfg, std::ostream& log) {
  const auto dir = prepare_out(cfg);
  const auto opts = construction_options(cfg);
  const auto certs = universality::certify_all(opts, cfg.seed());
  const auto path = dir / "certificates.txt";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  universality::write_report(os, opts, certs);
  std::size_t failed = 0;
  for (const auto& c : certs) {
    failed += c.pass ? 0 : 1;
    log << (c.pass ? "PASS " : "FAIL ") << c.id << " measured=" << c.measured
        << (c.compare == universality::Compare::AtMost ? " <= " : " >= ") << c.threshold;
    if (!c.note.empty()) log << "  (" << c.note << ")";
    log << '\n';
  }
  log << certs.size() - failed << "/" << certs.size() << " certificates passed; report " << path.string()
      << '\n';
  return failed == 0 ? 0 : 1;
}

int cmd_train_sinusoid(const Config& cfg, std::ostream& log) {
  const auto dir = prepare_out(cfg);
  const auto m = sinusoid_meta_config(cfg);
  const auto train_ranges = sinusoid_train_ranges(cfg);
  const maml::TaskSampler sampler = [train_ranges](Rng& rng) {
    return tasks::sample_sinusoid(rng, train_ranges);
  };

  CsvWriter curve(dir / "sinusoid_train.csv", cfg.snapshot(), {"iteration", "meta_loss", "wall_seconds"});
  const auto result = maml::meta_train(m, sampler, [&](const maml::LossPoint& p) {
    curve.row({std::to_string(p.iteration), CsvWriter::num(p.meta_loss), CsvWriter::num(p.wall_seconds)});
    log << "iteration " << p.iteration << " meta-loss " << p.meta_loss << std::endl;
  });
  models::save_checkpoint(checkpoint_path(cfg), result.params);

  const auto test = sinusoid_test_tasks(sinusoid_eval_ranges(cfg), cfg.count("trials"), cfg.seed());
  const auto steps = cfg.count("eval.steps");
  const auto curves = finetune_curves(result.params, test, m.alpha, steps, m.loss);
  CsvWriter eval(dir / "sinusoid_eval.csv", cfg.snapshot(),
                 {"step", "support_mse_mean", "support_mse_ci", "query_mse_mean", "query_mse_ci"});
  for (std::size_t s = 0; s <= steps; ++s) {
    eval.row({std::to_string(s), CsvWriter::num(curves.support[s].mean),
              CsvWriter::num(curves.support[s].ci95), CsvWriter::num(curves.query[s].mean),
              CsvWriter::num(curves.query[s].ci95)});
  }
  log << "query mse before adaptation " << curves.query.front().mean << ", after " << steps
      << " steps " << curves.query.back().mean << '\n';
  return 0;
}

int cmd_finetune(const Config& cfg, std::ostream& log) {
  const auto trained = load_trained(cfg);
  const auto dir = prepare_out(cfg);
  const auto steps = cfg.count("finetune.max_steps");
  const auto loss = maml::loss_from_string(cfg.raw("maml.loss"));
  const auto test = sinusoid_test_tasks(sinusoid_eval_ranges(cfg), cfg.count("trials"), cfg.seed());

  Rng init_rng(cfg.seed(), 2);
  const auto scratch = models::init_mlp(layer_sizes_of(trained), trained.bias_transform_dim(), init_rng);

  CsvWriter csv(dir / "finetune.csv", cfg.snapshot(),
                {"step", "support_mse_mean", "support_mse_ci", "query_mse_mean", "query_mse_ci", "method"});
  const std::pair<const char*, CurveSummary> runs[] = {
      {"maml", finetune_curves(trained, test, cfg.number("finetune.alpha"), steps, loss)},
      {"scratch", finetune_curves(scratch, test, cfg.number("finetune.scratch_lr"), steps, loss,
                                  maml::optimizer_from_string(cfg.raw("finetune.scratch_optimizer")))},
  };
  for (const auto& [method, c] : runs) {
    for (std::size_t s = 0; s <= steps; ++s) {
      csv.row({std::to_string(s), CsvWriter::num(c.support[s].mean), CsvWriter::num(c.support[s].ci95),
               CsvWriter::num(c.query[s].mean), CsvWriter::num(c.query[s].ci95), method});
    }
    log << method << ": support mse " << c.support.back().mean << ", query mse " << c.query.back().mean
        << " after " << steps << " steps\n";
  }
  return 0;
}

int cmd_ood_sweep(const Config& cfg, std::ostream& log) {
  const auto trained = load_trained(cfg);
  const auto dir = prepare_out(cfg);
  const auto axis = tasks::sweep_axis_from_string(cfg.raw("ood.axis"));
  const auto points = ood_evaluate(trained, axis, cfg.numbers("ood.grid"), sinusoid_eval_ranges(cfg),
                                   cfg.count("trials"), cfg.seed(), cfg.number("maml.alpha"),
                                   cfg.count("ood.steps"), maml::loss_from_string(cfg.raw("maml.loss")));
  CsvWriter csv(dir / ("ood_" + tasks::to_string(axis) + ".csv"), cfg.snapshot(),
                {"grid_value", "method", "amp_lo", "amp_hi", "phase_lo", "phase_hi", "input_lo",
                 "input_hi", "trials", "mse_mean", "mse_ci"});
  for (const char* method : {"maml_pre", "maml"}) {
    for (const auto& p : points) {
      const auto& s = std::string(method) == "maml" ? p.post : p.pre;
      const auto& r = p.ranges;
      csv.row({CsvWriter::num(p.grid_value), method, CsvWriter::num(r.amplitude.lo),
               CsvWriter::num(r.amplitude.hi), CsvWriter::num(r.phase.lo), CsvWriter::num(r.phase.hi),
               CsvWriter::num(r.input.lo), CsvWriter::num(r.input.hi), std::to_string(s.n),
               CsvWriter::num(s.mean), CsvWriter::num(s.ci95)});
    }
  }
  for (const auto& p : points) {
    log << tasks::to_string(axis) << " " << p.grid_value << ": post-adaptation mse " << p.post.mean << '\n';
  }
  return 0;
}

int cmd_depth_sweep(const Config& cfg, std::ostream& log) {
  const auto dir = prepare_out(cfg);
  const auto s = depth_settings(cfg);
  const auto records = depth_sweep(s, &log);
  CsvWriter csv(dir / "depth_sweep.csv", cfg.snapshot(),
                {"depth", "width", "parameters", "seed", "method", "mse", "wall_seconds"});
  for (const auto& r : records) {
    csv.row({std::to_string(r.depth), std::to_string(r.width), std::to_string(r.parameters),
             std::to_string(r.seed), r.method, CsvWriter::num(r.mse), CsvWriter::num(r.wall_seconds)});
  }
  CsvWriter summary(dir / "depth_summary.csv", cfg.snapshot(),
                    {"depth", "method", "runs", "mse_mean", "mse_std", "mse_ci"});
  for (std::size_t depth : s.depths) {
    for (const char* method : {"maml", "oracle"}) {
      std::vector<double> v;
      for (const auto& r : records) {
        if (r.depth == depth && r.method == method) v.push_back(r.mse);
      }
      const auto st = summarize(v);
      summary.row({std::to_string(depth), method, std::to_string(st.n), CsvWriter::num(st.mean),
                   CsvWriter::num(st.stddev), CsvWriter::num(st.ci95)});
    }
  }
  return 0;
}

int cmd_dump_tasks(const Config& cfg, std::ostream& log) {
  const auto dir = prepare_out(cfg);
  const auto family = tasks::family_from_string(cfg.raw("dump.family"));
  const auto count = cfg.count("dump.count");
  const auto path = dir / ("tasks_" + tasks::to_string(family) + ".txt");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "# config: " << cfg.snapshot() << '\n';
  Rng rng(cfg.seed(), 1);
  const auto sin_ranges = sinusoid_train_ranges(cfg);
  tasks::PolynomialRanges poly;
  poly.k_shot = cfg.count("depth.k_shot");
  poly.query_size = cfg.count("depth.query_size");
  for (std::size_t i = 0; i < count; ++i) {
    const auto t = family == tasks::Family::Sinusoid ? tasks::sample_sinusoid(rng, sin_ranges)
                                                     : tasks::sample_polynomial(rng, poly);
    tasks::write_task_record(os, t, i);
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
  log << "wrote " << count << " " << tasks::to_string(family) << " tasks to " << path.string() << '\n';
  return 0;
}

}  // namespace gbml::expcli
