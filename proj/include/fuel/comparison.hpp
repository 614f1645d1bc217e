#pragma once

// Cross-configuration comparison over a (QPS × Qscore threshold) grid.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuel/functional_unit.hpp"

namespace fuel::compare {

struct GridCell {
    double qps = 0.0;
    double alpha = 0.0;
    std::map<std::string, std::optional<double>> per_config;  // config_label -> CFU
    std::optional<std::string> greenest;                      // nullopt = infeasible
    std::optional<double> savings_pct;

    bool operator==(const GridCell&) const = default;
};

struct ComparisonGrid {
    std::vector<double> qps_axis;
    std::vector<double> alpha_axis;
    std::vector<std::string> configs;  // sorted
    std::vector<GridCell> cells;       // row-major: alpha index major, qps index minor
    double beta = fu::kDefaultBetaS;
    double gamma = fu::kDefaultGammaS;

    const GridCell& at(std::size_t qps_index, std::size_t alpha_index) const {
        return cells[alpha_index * qps_axis.size() + qps_index];
    }

    bool operator==(const ComparisonGrid&) const = default;
};

enum class GridFormat { csv, json, svg };

GridFormat grid_format_from_string(std::string_view token);

/// (ref - alt) / ref × 100. Negative when alt emits more than ref.
/// Throws UndefinedSavingsError unless ref > 0.
double carbon_savings(double cfu_ref, double cfu_alt);

/// Picks the greenest config of a cell (ties broken by config label) and its
/// savings against the second greenest. Fills `greenest` and `savings_pct`.
void rank_cell(GridCell& cell);

/// One cell per (qps, alpha) over the QPS values present in `reports` and the
/// given alpha axis. Reports are matched to cells by fu_spec.qps and fu_spec.alpha.
/// Throws AmbiguityError for two reports with the same (config, qps, alpha), and
/// SpecError when reports disagree with beta/gamma.
ComparisonGrid build_grid(std::span<const fu::CarbonReport> reports, std::span<const double> alpha_axis, double beta,
                          double gamma);

std::string emit_grid(const ComparisonGrid& grid, GridFormat format);

nlohmann::ordered_json grid_to_json(const ComparisonGrid& grid);
ComparisonGrid grid_from_json(const nlohmann::json& doc);
/// CSV carries no beta/gamma columns; the caller supplies them.
ComparisonGrid grid_from_csv(std::string_view csv, double beta, double gamma);

}  // namespace fuel::compare
