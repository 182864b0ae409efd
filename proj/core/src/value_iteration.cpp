#include "cvar_reach/value_iteration.hpp"

#include "cvar_reach/csv.hpp"
#include "cvar_reach/log.hpp"
#include "cvar_reach/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cvar_reach {

void StageCostSpec::validate() const {
    if (!(beta > 0.0))
        throw std::invalid_argument("stage cost: beta must be positive");
    if (!(m > 0.0))
        throw std::invalid_argument("stage cost: m must be positive");
}

double stage_cost(const StageCostSpec& spec, double x, bool* saturated) {
    double exponent = spec.m * spec.surface(x);
    const bool clipped = exponent > kExponentClip;
    if (clipped)
        exponent = kExponentClip;
    if (saturated != nullptr)
        *saturated = clipped;
    return std::exp(std::log(spec.beta) + exponent);
}

PolicyTable::PolicyTable(std::shared_ptr<const AugmentedGrid> grid, std::vector<double> controls,
                         std::size_t num_disturbances, int horizon)
    : grid_(std::move(grid)), controls_(std::move(controls)), num_disturbances_(num_disturbances) {
    if (horizon < 0)
        throw std::invalid_argument("policy table: negative horizon");
    stages_.resize(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) {
        stages_[static_cast<std::size_t>(k)].stage = k;
        stages_[static_cast<std::size_t>(k)].control.assign(grid_->size(), 0);
    }
}

std::size_t PolicyTable::control_index(int k, std::size_t state, std::size_t level) const {
    return stage(k).control.at(grid_->flat(state, level));
}

double PolicyTable::control(int k, std::size_t state, std::size_t level) const {
    return controls_.at(control_index(k, state, level));
}

bool PolicyTable::has_multipliers(int k) const {
    return stage(k).multipliers.size() == grid_->size() * num_disturbances_;
}

double PolicyTable::multiplier(int k, std::size_t state, std::size_t level, std::size_t j) const {
    return stage(k).multipliers.at(grid_->flat(state, level) * num_disturbances_ + j);
}

ValueTable terminal_values(std::shared_ptr<const AugmentedGrid> grid, const StageCostSpec& spec, int horizon,
                           std::size_t* saturated) {
    ValueTable table(grid, horizon);
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid->num_states(); ++i) {
        bool sat = false;
        const double c = stage_cost(spec, grid->states()[i], &sat);
        count += sat ? 1 : 0;
        for (std::size_t l = 0; l < grid->num_levels(); ++l)
            table.at(i, l) = c;
    }
    if (saturated != nullptr)
        *saturated = count * grid->num_levels();
    return table;
}

BackupResult bellman_backup(const SystemModel& model, const StageCostSpec& spec, const ValueTable& next, int k,
                            const BackupOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto grid_ptr = next.grid_ptr();
    const AugmentedGrid& grid = *grid_ptr;
    const auto controls = model.controls();
    const auto& dist = model.disturbance();
    const std::size_t W = dist.size();
    const std::size_t L = grid.num_levels();
    const std::vector<double> probs(dist.probs().begin(), dist.probs().end());

    BackupResult result{ValueTable(grid_ptr, k), PolicyStage{}, StageDiagnostics{}};
    result.policy.stage = k;
    result.policy.control.assign(grid.size(), 0);
    if (options.record_multipliers)
        result.policy.multipliers.assign(grid.size() * W, 1.0);

    struct PerState {
        std::size_t repaired = 0;
        double max_repair = 0.0;
        std::size_t floor_active = 0;
        bool saturated = false;
    };
    std::vector<PerState> per_state(grid.num_states());

    parallel_for(grid.num_states(), options.threads, [&](std::size_t i) {
        const double x = grid.states()[i];
        PerState& diag = per_state[i];
        const double cost = stage_cost(spec, x, &diag.saturated);
        std::vector<double> best(L, std::numeric_limits<double>::infinity());
        std::vector<EnvelopeSolution> best_solution(L);
        std::vector<std::size_t> best_control(L, 0);

        for (std::size_t u = 0; u < controls.size(); ++u) {
            std::vector<PiecewiseLinear> curves;
            curves.reserve(W);
            for (std::size_t j = 0; j < W; ++j) {
                const double x_next = grid.clamp_state(model.step(x, controls[u], dist.values()[j]));
                auto curve = successor_curve(next, x_next);
                if (curve.repair_change > kRepairReportThreshold)
                    ++diag.repaired;
                diag.max_repair = std::max(diag.max_repair, curve.repair_change);
                curves.push_back(std::move(curve.curve));
            }
            const EnvelopeSolver solver(probs, std::move(curves));
            for (std::size_t l = 0; l < L; ++l) {
                EnvelopeSolution sol;
                try {
                    sol = solver.solve(grid.levels()[l]);
                } catch (const EnvelopeError& e) {
                    std::ostringstream msg;
                    msg << e.what() << " at stage " << k << ", x=" << x << ", y=" << grid.levels()[l]
                        << ", u=" << controls[u];
                    throw EnvelopeError(msg.str());
                }
                const double q = cost + sol.optimal_value;
                const double margin = options.tie_tolerance * std::max(1.0, std::abs(best[l]));
                if (u == 0 || q < best[l] - margin) {
                    best[l] = q;
                    best_control[l] = u;
                    best_solution[l] = std::move(sol);
                }
            }
        }
        for (std::size_t l = 0; l < L; ++l) {
            const std::size_t flat = grid.flat(i, l);
            result.values.at(i, l) = best[l];
            result.policy.control[flat] = best_control[l];
            diag.floor_active += best_solution[l].floor_active;
            if (options.record_multipliers)
                std::copy(best_solution[l].r_star.begin(), best_solution[l].r_star.end(),
                          result.policy.multipliers.begin() + static_cast<std::ptrdiff_t>(flat * W));
        }
    });

    auto& d = result.diagnostics;
    d.stage = k;
    for (const PerState& s : per_state) {
        d.repaired_curves += s.repaired;
        d.max_repair = std::max(d.max_repair, s.max_repair);
        d.floor_active += s.floor_active;
        d.saturated_costs += s.saturated ? L : 0;
    }
    d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ValueIterationResult run_value_iteration(const SystemModel& model, std::shared_ptr<const AugmentedGrid> grid,
                                         const StageCostSpec& spec, int horizon, const BackupOptions& options) {
    spec.validate();
    if (horizon < 0)
        throw std::invalid_argument("value iteration: negative horizon");
    std::vector<double> controls(model.controls().begin(), model.controls().end());
    ValueIterationResult out{{}, PolicyTable(grid, controls, model.disturbance().size(), horizon), {}};

    std::vector<ValueTable> reversed;
    reversed.reserve(static_cast<std::size_t>(horizon) + 1);
    StageDiagnostics terminal;
    terminal.stage = horizon;
    reversed.push_back(terminal_values(grid, spec, horizon, &terminal.saturated_costs));
    out.diagnostics.push_back(terminal);

    for (int k = horizon - 1; k >= 0; --k) {
        BackupResult step = bellman_backup(model, spec, reversed.back(), k, options);
        out.policy.stage(k) = std::move(step.policy);
        out.diagnostics.push_back(step.diagnostics);
        if (step.diagnostics.repaired_curves > 0) {
            std::ostringstream msg;
            msg << "stage " << k << ": " << step.diagnostics.repaired_curves
                << " successor curves needed concavity repair (max lift " << step.diagnostics.max_repair << ")";
            log(LogLevel::info, msg.str());
        }
        reversed.push_back(std::move(step.values));
    }
    out.stages.assign(std::make_move_iterator(reversed.rbegin()), std::make_move_iterator(reversed.rend()));
    std::reverse(out.diagnostics.begin(), out.diagnostics.end());
    return out;
}

ConfidenceRollout confidence_rollout(const PolicyTable& policy, const SystemModel& model, double x0, double alpha0,
                                     std::span<const std::size_t> disturbances) {
    if (!(alpha0 > 0.0) || alpha0 > 1.0)
        throw std::domain_error("confidence_rollout: alpha0 must lie in (0, 1]");
    if (static_cast<int>(disturbances.size()) > policy.horizon())
        throw std::invalid_argument("confidence_rollout: more disturbances than policy stages");
    const AugmentedGrid& grid = policy.grid();
    const auto dvals = model.disturbance().values();
    ConfidenceRollout out;
    out.states.push_back({x0, alpha0});
    double x = x0;
    double y = alpha0;
    for (std::size_t k = 0; k < disturbances.size(); ++k) {
        const int stage = static_cast<int>(k);
        const std::size_t i = grid.nearest_state(x);
        const std::size_t l = grid.nearest_level(y);
        if (!policy.has_multipliers(stage)) {
            std::ostringstream msg;
            msg << "confidence_rollout: no confidence multipliers stored for stage " << stage << " at grid point (x="
                << grid.states()[i] << ", y=" << grid.levels()[l] << ")";
            throw std::runtime_error(msg.str());
        }
        const std::size_t j = disturbances[k];
        if (j >= dvals.size())
            throw std::out_of_range("confidence_rollout: disturbance index out of range");
        const double u = policy.control(stage, i, l);
        const double r = policy.multiplier(stage, i, l, j);
        out.controls.push_back(u);
        x = model.step(x, u, dvals[j]);
        y = std::clamp(y * r, grid.y_min(), 1.0);
        out.states.push_back({x, y});
    }
    return out;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

/// Locates (state, level) for CSV-provided coordinates.
std::pair<std::size_t, std::size_t> locate(const AugmentedGrid& grid, double x, double y) {
    const std::size_t i = grid.nearest_state(x);
    const std::size_t l = grid.nearest_level(y);
    if (std::abs(grid.states()[i] - x) > 1e-9 || std::abs(grid.levels()[l] - y) > 1e-9) {
        std::ostringstream msg;
        msg << "csv row (x=" << x << ", y=" << y << ") is not a grid point";
        throw std::runtime_error(msg.str());
    }
    return {i, l};
}

} // namespace

void write_value_table_csv(const std::filesystem::path& path, const ValueTable& table) {
    auto out = open_for_write(path);
    const AugmentedGrid& grid = table.grid();
    csv::write_row(out, {"k", "x", "y", "J"});
    for (std::size_t i = 0; i < grid.num_states(); ++i)
        for (std::size_t l = grid.num_levels(); l-- > 0;)
            csv::write_row(out, {std::to_string(table.stage()), csv::format(grid.states()[i]),
                                 csv::format(grid.levels()[l]), csv::format(table.at(i, l))});
}

void write_policy_csv(const std::filesystem::path& path, const PolicyTable& policy, int k) {
    auto out = open_for_write(path);
    const AugmentedGrid& grid = policy.grid();
    csv::write_row(out, {"k", "x", "y", "u"});
    for (std::size_t i = 0; i < grid.num_states(); ++i)
        for (std::size_t l = grid.num_levels(); l-- > 0;)
            csv::write_row(out, {std::to_string(k), csv::format(grid.states()[i]), csv::format(grid.levels()[l]),
                                 csv::format(policy.control(k, i, l))});
}

void write_multipliers_csv(const std::filesystem::path& path, const PolicyTable& policy, int k,
                           std::span<const double> disturbance_values) {
    if (!policy.has_multipliers(k))
        throw std::runtime_error("write_multipliers_csv: stage " + std::to_string(k) + " has no multipliers");
    auto out = open_for_write(path);
    const AugmentedGrid& grid = policy.grid();
    csv::write_row(out, {"k", "x", "y", "j", "d", "R"});
    for (std::size_t i = 0; i < grid.num_states(); ++i)
        for (std::size_t l = grid.num_levels(); l-- > 0;)
            for (std::size_t j = 0; j < policy.num_disturbances(); ++j)
                csv::write_row(out, {std::to_string(k), csv::format(grid.states()[i]), csv::format(grid.levels()[l]),
                                     std::to_string(j), csv::format(disturbance_values[j]),
                                     csv::format(policy.multiplier(k, i, l, j))});
}

ValueTable read_value_table_csv(const std::filesystem::path& path, std::shared_ptr<const AugmentedGrid> grid) {
    const csv::Table t = csv::read(path);
    const std::size_t ck = t.column("k"), cx = t.column("x"), cy = t.column("y"), cj = t.column("J");
    if (t.rows.empty())
        throw std::runtime_error("value table " + path.string() + " has no rows");
    ValueTable table(grid, static_cast<int>(csv::to_double(t.rows.front()[ck])));
    std::vector<bool> seen(grid->size(), false);
    for (const auto& row : t.rows) {
        const auto [i, l] = locate(*grid, csv::to_double(row[cx]), csv::to_double(row[cy]));
        table.at(i, l) = csv::to_double(row[cj]);
        seen[grid->flat(i, l)] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw std::runtime_error("value table " + path.string() + " does not cover the grid");
    return table;
}

PolicyTable read_policy_dir(const std::filesystem::path& dir, std::shared_ptr<const AugmentedGrid> grid,
                            std::vector<double> controls, std::size_t num_disturbances, int horizon) {
    PolicyTable policy(grid, controls, num_disturbances, horizon);
    for (int k = 0; k < horizon; ++k) {
        PolicyStage& stage = policy.stage(k);
        const csv::Table pt = csv::read(dir / ("policy_stage" + std::to_string(k) + ".csv"));
        const std::size_t cx = pt.column("x"), cy = pt.column("y"), cu = pt.column("u");
        for (const auto& row : pt.rows) {
            const auto [i, l] = locate(*grid, csv::to_double(row[cx]), csv::to_double(row[cy]));
            const double u = csv::to_double(row[cu]);
            auto it = std::find(controls.begin(), controls.end(), u);
            if (it == controls.end())
                throw std::runtime_error("policy file lists a control outside the control set");
            stage.control[grid->flat(i, l)] = static_cast<std::size_t>(it - controls.begin());
        }
        const auto mpath = dir / ("confidence_stage" + std::to_string(k) + ".csv");
        if (!std::filesystem::exists(mpath))
            continue;
        const csv::Table mt = csv::read(mpath);
        const std::size_t mx = mt.column("x"), my = mt.column("y"), mj = mt.column("j"), mr = mt.column("R");
        stage.multipliers.assign(grid->size() * num_disturbances, 1.0);
        for (const auto& row : mt.rows) {
            const auto [i, l] = locate(*grid, csv::to_double(row[mx]), csv::to_double(row[my]));
            const auto j = static_cast<std::size_t>(csv::to_double(row[mj]));
            if (j >= num_disturbances)
                throw std::runtime_error("multiplier file lists an unknown disturbance index");
            stage.multipliers[grid->flat(i, l) * num_disturbances + j] = csv::to_double(row[mr]);
        }
    }
    return policy;
}

} // namespace cvar_reach
