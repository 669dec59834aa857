#include <CLI11.hpp>

#include "uwcnn/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::uint64_t& seed, int& threads) {
  cmd->add_option("--seed", seed, "global random seed")->default_val(0);
  cmd->add_option("--threads", threads, "worker threads")->default_val(1)->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater image synthesis, enhancement network training and evaluation"};
  app.require_subcommand(1);

  uwcnn::SynthOptions synth;
  auto* s = app.add_subcommand("synth", "synthesize degraded/clean training pairs from clean images and depth maps");
  s->add_option("--manifest", synth.manifest, "clean<TAB>depth manifest")->required();
  s->add_option("--water-type", synth.water_type, "water type: " + uwcnn::water_type_names())->default_val("1");
  s->add_option("--variants", synth.variants, "degraded variants per clean image")->default_val(5);
  s->add_option("--resize", synth.resize, "WIDTHxHEIGHT or none")->default_val("310x230");
  s->add_option("--out", synth.out, "output directory")->required();
  add_common(s, synth.seed, synth.threads);

  uwcnn::TrainCommandOptions train;
  std::string val_manifest;
  std::string metrics;
  auto* t = app.add_subcommand("train", "train an enhancement network on a synthesized dataset");
  t->add_option("--train-manifest", train.train_manifest)->required();
  t->add_option("--val-manifest", val_manifest);
  t->add_option("--epochs", train.epochs)->default_val(20);
  t->add_option("--batch", train.batch)->default_val(16);
  t->add_option("--crop", train.crop, "none or N for one random NxN crop per sample per epoch")->default_val("none");
  t->add_option("--out-checkpoint", train.out_checkpoint)->required();
  t->add_option("--metrics", metrics, "per-epoch loss log (default <checkpoint>.metrics.tsv)");
  t->add_flag("--no-residual", train.no_residual);
  t->add_flag("--no-dense", train.no_dense);
  t->add_flag("--no-ssim-loss", train.no_ssim_loss);
  t->add_option("--lr", train.lr, "ADAM learning rate")->default_val(0.0002);
  add_common(t, train.seed, train.threads);

  uwcnn::EnhanceOptions enhance;
  std::uint64_t unused_seed = 0;
  auto* e = app.add_subcommand("enhance", "enhance an image or a directory of images");
  e->add_option("--checkpoint", enhance.checkpoint)->required();
  e->add_option("--input", enhance.input, "image file or directory")->required();
  e->add_option("--out", enhance.out, "output file or directory")->required();
  e->add_flag("--post", enhance.post, "apply HSI saturation/intensity stretching");
  add_common(e, unused_seed, enhance.threads);

  uwcnn::EvalOptions eval;
  std::string report;
  auto* v = app.add_subcommand("eval", "score enhanced images against ground truth");
  v->add_option("--manifest", eval.manifest)->required();
  v->add_option("--enhanced-dir", eval.enhanced_dir)->required();
  v->add_option("--report", report, "report path (default <enhanced-dir>/eval_report.tsv)");
  add_common(v, unused_seed, eval.threads);

  uwcnn::GradcheckOptions grad;
  int unused_threads = 1;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
  g->add_option("--size", grad.size)->default_val(8);
  g->add_flag("--corrupt", grad.corrupt, "perturb one analytic gradient (harness self-test)");
  add_common(g, grad.seed, unused_threads);

  uwcnn::AblateOptions ablate;
  auto* a = app.add_subcommand("ablate", "train and compare the full model against its three ablations");
  a->add_option("--train-manifest", ablate.train_manifest)->required();
  a->add_option("--val-manifest", ablate.val_manifest)->required();
  a->add_option("--epochs", ablate.epochs)->default_val(20);
  a->add_option("--batch", ablate.batch)->default_val(16);
  a->add_option("--crop", ablate.crop)->default_val("none");
  a->add_option("--out-dir", ablate.out_dir)->required();
  add_common(a, ablate.seed, ablate.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : uwcnn::kExitConfig;
  }

  if (!val_manifest.empty()) train.val_manifest = val_manifest;
  if (!metrics.empty()) train.metrics = metrics;
  if (!report.empty()) eval.report = report;

  if (s->parsed()) return uwcnn::run_synth(synth);
  if (t->parsed()) return uwcnn::run_train(train);
  if (e->parsed()) return uwcnn::run_enhance(enhance);
  if (v->parsed()) return uwcnn::run_eval(eval);
  if (g->parsed()) return uwcnn::run_gradcheck(grad);
  return uwcnn::run_ablate(ablate);
}
