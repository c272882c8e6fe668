#pragma once

// Estimator losses and the training loop: each epoch solves the Galerkin
// system for c (or the pencil for (lambda, c)) on the current basis, then
// takes one optimizer step on the network parameters with c and lambda held
// fixed.

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tnn/forms.hpp"
#include "tnn/linalg.hpp"
#include "tnn/problem.hpp"
#include "tnn/tnn.hpp"

namespace tnn {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class LossKind { Estimator, BoundaryFit, Rayleigh };
enum class OptimizerKind { Adam, Lbfgs };

/// Basis set ids inside the Forms context.
inline constexpr int kMainSet = 0;
inline constexpr int kLiftSet = 1;

struct Metrics {
  double e_l2 = kNaN;
  double e_h1 = kNaN;
  double e_lambda = kNaN;
  double e_bd = kNaN;
  double energy = kNaN;  // ||u - u_p||_a, on request
};

struct SolveResult {
  double lambda = kNaN;
  double jitter = 0.0;
  double residual = 0.0;
};

/// Loss evaluation on one problem. The trainable network is the main state for
/// estimator and Rayleigh losses and the lift for the boundary fit.
class Objective {
 public:
  explicit Objective(const ProblemSpec& problem, int threads = 1);

  const ProblemSpec& problem() const noexcept { return problem_; }
  const std::vector<QuadGrid>& grids() const noexcept { return grids_; }
  Forms& forms() noexcept { return forms_; }
  const EvalTables& tables(int set) const { return tables_.at(set); }

  /// Tables of `state` bound as `set`.
  void prepare(int set, const TnnState& state, bool trainable);
  /// Galerkin step on the prepared tables: writes state.c, returns lambda for
  /// eigen problems. For the estimator of a non-homogeneous problem the lift
  /// must be prepared and hold its c.
  SolveResult solve(LossKind kind, TnnState& state);
  /// Loss at the prepared tables with c (and lambda) fixed. With grad, also its
  /// gradient with respect to the flat parameters of the trainable state.
  double loss(LossKind kind, const TnnState& state, std::vector<double>* grad);
  /// Errors against the exact solution; the lift is null unless the problem is
  /// non-homogeneous Dirichlet.
  Metrics metrics(const TnnState* main, const TnnState* lift, bool energy);

  double lambda() const noexcept { return lambda_; }
  void set_lambda(double v) noexcept { lambda_ = v; }
  /// Whether the interior residual is weighted by b^{-1/2}.
  bool weighted() const noexcept { return weighted_; }
  /// With through_solve (the default) the estimator gradient includes the
  /// dependence of the solved c (and lambda) on the parameters, added by an
  /// adjoint term; otherwise c and lambda are treated as constants.
  void set_through_solve(bool on) noexcept { through_solve_ = on; }
  bool through_solve() const noexcept { return through_solve_; }
  /// Squared loss of the last evaluation in extended precision.
  Extended last_squared() const noexcept { return last_squared_; }

  /// Term lists for tests and diagnostics.
  struct Component {
    int set;
    const std::vector<double>* c;
  };
  std::vector<Term> residual_terms(const std::vector<Component>& u, bool eigen, double lambda);
  /// The residual without its data part.
  std::vector<Term> operator_terms(const std::vector<Component>& u, bool eigen, double lambda);
  std::vector<Term> flux_terms(const std::vector<Component>& u, int dim, bool high, bool data = true);

 private:
  Var estimator(const TnnState& state, Tape* tape, Extended& squared);
  Var boundary_fit(const TnnState& lift, Tape* tape, Extended& squared);
  Var rayleigh(const TnnState& state, Tape* tape, Extended& value);
  std::vector<Component> solution_components(const TnnState& main) const;
  /// a(v, w), (v, w) and the load functional as tape expressions.
  Var energy_form(const std::vector<Component>& v, const std::vector<Component>& w, Tape* tape);
  Var mass_form(const std::vector<Component>& v, const std::vector<Component>& w, Tape* tape);
  Var load_form(const std::vector<Component>& v, Tape* tape);
  /// Term whose parameter gradient carries d(S)/dc * dc/dtheta (and the lambda
  /// part) for the squared estimator S, with c and lambda frozen.
  Var solve_adjoint(const TnnState& state, Tape* tape);

  ProblemSpec problem_;
  std::vector<QuadGrid> grids_;
  int threads_;
  Forms forms_;
  std::map<int, EvalTables> tables_;
  const TnnState* lift_ = nullptr;  // frozen lift during the interior phases
  double lambda_ = kNaN;
  bool weighted_ = false;
  bool through_solve_ = true;
  Matrix stiff_, mass_;  // from the last Galerkin solve on the main set
  Integral interior_;  // with the b^{-1} weight when weighted_
  Tape tape_;
  Extended last_squared_ = 0;
  std::vector<SeparableFn> exact_grad_;
};

struct EpochRecord {
  long long epoch = 0;
  std::string phase;
  double loss = kNaN;
  Metrics metrics;
  double lambda = kNaN;
  double jitter = 0.0;
  double elapsed = 0.0;
};

struct Phase {
  std::string name;
  OptimizerKind optimizer = OptimizerKind::Adam;
  LossKind loss = LossKind::Estimator;
  int set = kMainSet;
  int epochs = 0;
  double lr = 0.0;
};

std::vector<Phase> phases_for(const ProblemSpec& problem);

/// Everything needed to continue a run exactly where it stopped.
struct TrainerSnapshot {
  std::uint64_t seed = 0;
  std::size_t phase = 0;
  long long phase_epoch = 0;
  long long epoch = 0;
  TnnState main;
  std::optional<TnnState> lift;
  AdamState adam;
  LbfgsState lbfgs;
  std::string rng;  // textual engine state
  bool finished = false;
};

struct TrainOptions {
  int threads = 1;
  long long checkpoint_every = 1000;  // 0 disables cadence checkpoints
  bool energy = false;                // track ||u - u_p||_a per record
  std::function<void(const EpochRecord&)> on_record;
  std::function<void(const TrainerSnapshot&)> on_checkpoint;
};

struct TrainReport {
  std::vector<EpochRecord> records;
  EpochRecord final;
  double wall_seconds = 0.0;
  int jitter_events = 0;
  int skipped_steps = 0;   // Adam steps with a non-finite gradient
  int rejected_steps = 0;  // L-BFGS line searches without descent
};

class Trainer {
 public:
  /// Fresh states from the seed: the main network, then the lift if needed.
  Trainer(const ProblemSpec& problem, std::uint64_t seed);
  /// Continue from a snapshot.
  Trainer(const ProblemSpec& problem, TrainerSnapshot snapshot);

  TrainReport run(const TrainOptions& options);

  const TrainerSnapshot& snapshot() const noexcept { return snap_; }
  const std::vector<Phase>& phases() const noexcept { return phases_; }

 private:
  void freeze_lift(Objective& obj);
  EpochRecord evaluate(Objective& obj, const Phase& phase, bool energy, std::vector<double>* grad);

  ProblemSpec problem_;
  std::vector<Phase> phases_;
  TrainerSnapshot snap_;
};

}  // namespace tnn
