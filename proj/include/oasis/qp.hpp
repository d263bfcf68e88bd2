#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace oasis {

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

// Convex QP in standard ranged form:
//   minimize 1/2 x'Px + q'x + objective_const   subject to   l <= Ax <= u.
// P must be symmetric PSD (both halves stored); box constraints are rows of A.
struct QpProblem {
    int n_vars = 0;
    int n_cons = 0;
    std::vector<Triplet> p;  // symmetric
    std::vector<double> q;
    double objective_const = 0.0;
    std::vector<Triplet> a;
    std::vector<double> lower;
    std::vector<double> upper;

    // Text dump (P/A as triplets, then q, l, u) for cross-checking against
    // external solvers.
    void dump(const std::filesystem::path& path) const;
};

struct QpConfig {
    double rho = 0.1;          // ADMM step size (per-row, scaled x1e3 on equalities)
    double sigma = 1e-6;       // proximal regularization
    double relax_alpha = 1.6;  // over-relaxation
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 4000;
    int check_interval = 25;   // residual/termination cadence
    bool adaptive_rho = true;
    int scaling_iters = 10;    // Ruiz equilibration sweeps; 0 disables
};

enum class QpStatus { Solved, MaxIter, Infeasible };

struct QpSolution {
    std::vector<double> x;
    std::vector<double> y;  // dual multipliers of the ranged rows
    double objective_value = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::MaxIter;
    double infeasibility_certificate = 0.0;  // ||delta_y|| when Infeasible
    std::uint64_t workspace_bytes = 0;       // KKT factor + iterate storage
};

struct WarmStart {
    std::vector<double> x;
    std::vector<double> y;  // may be empty
};

// Operator-splitting (ADMM) solver: alternates a cached quasi-definite KKT
// solve with projection onto [l, u]. Deterministic for fixed inputs/config.
QpSolution solve_qp(const QpProblem& problem, const QpConfig& config,
                    const std::optional<WarmStart>& warm = std::nullopt);

// Exposure-matching allocation in producer/consumer form. One variable per
// (producer, consumer) pair; the objective is
//   sum_p (target_p - sum_{vars of p} alpha * x)^2
// with per-variable box bounds and per-consumer ranged sum bounds.
struct AllocationVar {
    int producer = 0;
    int consumer = 0;
    double alpha = 1.0;
    double p_base = 0.0;
    double lo = 0.0;
    double hi = 1.0;
};

struct AllocationProblem {
    int n_producers = 0;
    int n_consumers = 0;
    std::vector<AllocationVar> vars;
    std::vector<double> target;   // per producer
    std::vector<double> sum_lo;   // per consumer
    std::vector<double> sum_hi;
};

struct BlockPlan {
    int k_blocks = 1;
    int max_outer = 10;
    std::vector<std::vector<int>> blocks;  // consumer ids per block
};

// Deterministic plan: consumers sorted ascending, dealt round-robin into K
// roughly equal blocks.
BlockPlan make_block_plan(int n_consumers, int k_blocks, int max_outer);

struct AllocationResult {
    std::vector<double> x;                // per var, aligned with problem.vars
    std::vector<double> objective_trace;  // J before any solve, then after each block solve
    int block_solves = 0;
    std::uint64_t peak_workspace_bytes = 0;  // largest single block solve
};

// Assembles the full QP for an allocation problem (optionally restricted to
// a subset of consumers, with residual targets folded in by the caller).
QpProblem build_qp(const AllocationProblem& problem);

// Objective J at a candidate point, recomputed from the allocation data.
double allocation_objective(const AllocationProblem& problem, const std::vector<double>& x);

// Gauss-Seidel block sweep (Algorithm: init at p_base, solve each block's QP
// with the other blocks' variables frozen, write back, repeat max_outer
// times). Blocks are solved in plan order; the trace is non-increasing up to
// solver tolerance.
AllocationResult solve_allocation(const AllocationProblem& problem, const BlockPlan& plan,
                                  const QpConfig& config);

}  // namespace oasis
