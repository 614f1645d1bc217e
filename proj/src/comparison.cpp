#include "fuel/comparison.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

namespace fuel::compare {

using nlohmann::json;
using nlohmann::ordered_json;

GridFormat grid_format_from_string(std::string_view token) {
    if (token == "csv") return GridFormat::csv;
    if (token == "json") return GridFormat::json;
    if (token == "svg") return GridFormat::svg;
    throw UsageError("unsupported grid format '" + std::string(token) + "' (expected csv, json or svg)");
}

double carbon_savings(double cfu_ref, double cfu_alt) {
    if (!(cfu_ref > 0.0)) throw UndefinedSavingsError("savings need a positive reference CFU");
    return (cfu_ref - cfu_alt) / cfu_ref * 100.0;
}

void rank_cell(GridCell& cell) {
    // per_config is a std::map, so iteration is already in label order; strict
    // comparisons keep the lexicographically first label on ties.
    const std::string* best = nullptr;
    const std::string* second = nullptr;
    double best_v = 0.0;
    double second_v = 0.0;
    for (const auto& [label, value] : cell.per_config) {
        if (!value) continue;
        if (best == nullptr || *value < best_v) {
            second = best;
            second_v = best_v;
            best = &label;
            best_v = *value;
        } else if (second == nullptr || *value < second_v) {
            second = &label;
            second_v = *value;
        }
    }
    cell.greenest = best ? std::optional<std::string>(*best) : std::nullopt;
    cell.savings_pct.reset();
    if (second != nullptr) {
        // Two zero-carbon configs tie; there is nothing to save.
        cell.savings_pct = second_v > 0.0 ? carbon_savings(second_v, best_v) : 0.0;
    }
}

ComparisonGrid build_grid(std::span<const fu::CarbonReport> reports, std::span<const double> alpha_axis, double beta,
                          double gamma) {
    ComparisonGrid grid;
    grid.beta = beta;
    grid.gamma = gamma;

    std::set<double> qps_values;
    std::set<std::string> configs;
    std::map<std::tuple<std::string, double, double>, const fu::CarbonReport*> index;
    for (const auto& r : reports) {
        if (r.fu_spec.beta != beta || r.fu_spec.gamma != gamma) {
            throw SpecError("report for '" + r.config_label + "' uses different TTFT/TPOT limits than the grid");
        }
        qps_values.insert(r.fu_spec.qps);
        configs.insert(r.config_label);
        auto key = std::make_tuple(r.config_label, r.fu_spec.qps, r.fu_spec.alpha);
        if (!index.emplace(key, &r).second) {
            throw AmbiguityError("more than one report for config '" + r.config_label +
                                 "' at qps " + std::to_string(r.fu_spec.qps));
        }
    }

    grid.qps_axis.assign(qps_values.begin(), qps_values.end());
    grid.alpha_axis.assign(alpha_axis.begin(), alpha_axis.end());
    std::sort(grid.alpha_axis.begin(), grid.alpha_axis.end());
    grid.alpha_axis.erase(std::unique(grid.alpha_axis.begin(), grid.alpha_axis.end()), grid.alpha_axis.end());
    grid.configs.assign(configs.begin(), configs.end());

    for (double alpha : grid.alpha_axis) {
        for (double qps : grid.qps_axis) {
            GridCell cell;
            cell.qps = qps;
            cell.alpha = alpha;
            for (const auto& label : grid.configs) {
                auto it = index.find(std::make_tuple(label, qps, alpha));
                cell.per_config[label] = it == index.end() ? std::nullopt : it->second->cfu_g_per_token;
            }
            rank_cell(cell);
            grid.cells.push_back(std::move(cell));
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Formatting helpers

namespace {

std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_real(std::string_view s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw SpecError("malformed number '" + std::string(s) + "' in grid document");
    }
    return v;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
            any = true;
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kCfuPrefix = "cfu:";
constexpr const char* kUndefined = "undefined";
constexpr const char* kInfeasible = "infeasible";

std::string emit_csv(const ComparisonGrid& grid) {
    std::string out = "qps,alpha";
    for (const auto& c : grid.configs) out += "," + csv_field(kCfuPrefix + c);
    out += ",greenest,savings_pct\n";
    for (const auto& cell : grid.cells) {
        out += format_real(cell.qps) + "," + format_real(cell.alpha);
        for (const auto& c : grid.configs) {
            auto it = cell.per_config.find(c);
            const bool defined = it != cell.per_config.end() && it->second.has_value();
            out += "," + (defined ? format_real(*it->second) : std::string(kUndefined));
        }
        out += "," + csv_field(cell.greenest.value_or(kInfeasible));
        out += "," + (cell.savings_pct ? format_real(*cell.savings_pct) : std::string());
        out += "\n";
    }
    return out;
}

// Tile colours by config index; configs beyond the palette wrap around.
constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                    "#66a61e", "#e6ab02", "#a6761d", "#666666"};
constexpr const char* kInfeasibleFill = "#dddddd";

std::string emit_svg(const ComparisonGrid& grid) {
    constexpr int tile_w = 80;
    constexpr int tile_h = 50;
    constexpr int left = 90;
    constexpr int top = 30;
    const int nq = static_cast<int>(grid.qps_axis.size());
    const int na = static_cast<int>(grid.alpha_axis.size());
    const int plot_w = nq * tile_w;
    const int plot_h = na * tile_h;
    const int legend_top = top + plot_h + 60;
    const int width = left + plot_w + 30;
    const int height = legend_top + 20 * static_cast<int>(grid.configs.size()) + 30;

    auto colour_of = [&grid](const std::optional<std::string>& label) -> std::string {
        if (!label) return kInfeasibleFill;
        const auto it = std::find(grid.configs.begin(), grid.configs.end(), *label);
        const auto idx = static_cast<std::size_t>(it - grid.configs.begin());
        return kPalette[idx % std::size(kPalette)];
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\" style=\"font-family:sans-serif;font-size:12px\">\n";
    svg << "<title>Greenest configuration per (QPS, Qscore) cell</title>\n";

    for (int a = 0; a < na; ++a) {
        // Highest alpha on the top row.
        const int y = top + (na - 1 - a) * tile_h;
        for (int q = 0; q < nq; ++q) {
            const int x = left + q * tile_w;
            const GridCell& cell = grid.at(q, a);
            svg << "<rect class=\"tile\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << tile_w << "\" height=\""
                << tile_h << "\" style=\"fill:" << colour_of(cell.greenest) << ";stroke:#ffffff;stroke-width:1\">"
                << "<title>" << xml_escape(cell.greenest.value_or(kInfeasible)) << "</title></rect>\n";
            std::string label;
            if (!cell.greenest) {
                label = "n/a";
            } else if (cell.savings_pct) {
                label = std::to_string(std::lround(*cell.savings_pct)) + "%";
            } else {
                label = "-";
            }
            svg << "<text x=\"" << x + tile_w / 2 << "\" y=\"" << y + tile_h / 2 + 4
                << "\" style=\"text-anchor:middle;fill:#000000\">" << label << "</text>\n";
        }
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + tile_h / 2 + 4 << "\" style=\"text-anchor:end\">"
            << xml_escape(format_real(grid.alpha_axis[a])) << "</text>\n";
    }
    for (int q = 0; q < nq; ++q) {
        svg << "<text x=\"" << left + q * tile_w + tile_w / 2 << "\" y=\"" << top + plot_h + 18
            << "\" style=\"text-anchor:middle\">" << xml_escape(format_real(grid.qps_axis[q])) << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 38
        << "\" style=\"text-anchor:middle;font-weight:bold\">QPS</text>\n";
    svg << "<text x=\"20\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 20 " << top + plot_h / 2
        << ")\" style=\"text-anchor:middle;font-weight:bold\">Qscore</text>\n";

    for (std::size_t i = 0; i < grid.configs.size(); ++i) {
        const int y = legend_top + static_cast<int>(i) * 20;
        svg << "<rect class=\"legend\" x=\"" << left << "\" y=\"" << y << "\" width=\"14\" height=\"14\" style=\"fill:"
            << kPalette[i % std::size(kPalette)] << "\"/>\n";
        svg << "<text x=\"" << left + 20 << "\" y=\"" << y + 11 << "\">" << xml_escape(grid.configs[i])
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

std::string emit_grid(const ComparisonGrid& grid, GridFormat format) {
    switch (format) {
        case GridFormat::csv: return emit_csv(grid);
        case GridFormat::json: return grid_to_json(grid).dump(2) + "\n";
        case GridFormat::svg: return emit_svg(grid);
    }
    throw UsageError("unsupported grid format");
}

// ---------------------------------------------------------------------------
// JSON

ordered_json grid_to_json(const ComparisonGrid& grid) {
    ordered_json doc;
    doc["beta"] = fu::real_to_json(grid.beta);
    doc["gamma"] = fu::real_to_json(grid.gamma);
    doc["qps_axis"] = ordered_json::array();
    for (double q : grid.qps_axis) doc["qps_axis"].push_back(fu::real_to_json(q));
    doc["alpha_axis"] = ordered_json::array();
    for (double a : grid.alpha_axis) doc["alpha_axis"].push_back(fu::real_to_json(a));
    doc["configs"] = grid.configs;
    doc["cells"] = ordered_json::array();
    for (const auto& cell : grid.cells) {
        ordered_json c;
        c["qps"] = fu::real_to_json(cell.qps);
        c["alpha"] = fu::real_to_json(cell.alpha);
        ordered_json per = ordered_json::object();
        for (const auto& [label, v] : cell.per_config) {
            per[label] = v ? ordered_json(*v) : ordered_json(kUndefined);
        }
        c["per_config"] = per;
        c["greenest"] = cell.greenest ? ordered_json(*cell.greenest) : ordered_json(nullptr);
        c["savings_pct"] = cell.savings_pct ? ordered_json(*cell.savings_pct) : ordered_json(nullptr);
        doc["cells"].push_back(c);
    }
    return doc;
}

ComparisonGrid grid_from_json(const json& doc) {
    try {
        ComparisonGrid grid;
        grid.beta = fu::real_from_json(doc.at("beta"));
        grid.gamma = fu::real_from_json(doc.at("gamma"));
        for (const auto& q : doc.at("qps_axis")) grid.qps_axis.push_back(fu::real_from_json(q));
        for (const auto& a : doc.at("alpha_axis")) grid.alpha_axis.push_back(fu::real_from_json(a));
        grid.configs = doc.at("configs").get<std::vector<std::string>>();
        for (const auto& c : doc.at("cells")) {
            GridCell cell;
            cell.qps = fu::real_from_json(c.at("qps"));
            cell.alpha = fu::real_from_json(c.at("alpha"));
            for (const auto& [label, v] : c.at("per_config").items()) {
                cell.per_config[label] = v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt;
            }
            if (!c.at("greenest").is_null()) cell.greenest = c.at("greenest").get<std::string>();
            if (!c.at("savings_pct").is_null()) cell.savings_pct = c.at("savings_pct").get<double>();
            grid.cells.push_back(std::move(cell));
        }
        if (grid.cells.size() != grid.qps_axis.size() * grid.alpha_axis.size()) {
            throw SpecError("grid document does not cover the full axis cross-product");
        }
        return grid;
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed grid document: ") + e.what());
    }
}

ComparisonGrid grid_from_csv(std::string_view csv, double beta, double gamma) {
    const auto rows = parse_csv(csv);
    if (rows.empty()) throw SpecError("empty grid CSV");
    const auto& header = rows.front();
    if (header.size() < 4 || header[0] != "qps" || header[1] != "alpha" || header[header.size() - 2] != "greenest" ||
        header.back() != "savings_pct") {
        throw SpecError("unexpected grid CSV header");
    }
    ComparisonGrid grid;
    grid.beta = beta;
    grid.gamma = gamma;
    const std::string prefix = kCfuPrefix;
    for (std::size_t i = 2; i + 2 < header.size(); ++i) {
        if (header[i].rfind(prefix, 0) != 0) throw SpecError("grid CSV column '" + header[i] + "' is not a CFU column");
        grid.configs.push_back(header[i].substr(prefix.size()));
    }
    std::set<double> qps, alpha;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) throw SpecError("grid CSV row " + std::to_string(r) + " has wrong width");
        GridCell cell;
        cell.qps = parse_real(row[0]);
        cell.alpha = parse_real(row[1]);
        for (std::size_t i = 0; i < grid.configs.size(); ++i) {
            const auto& v = row[2 + i];
            cell.per_config[grid.configs[i]] = v == kUndefined ? std::nullopt : std::optional<double>(parse_real(v));
        }
        const auto& g = row[row.size() - 2];
        if (g != kInfeasible) cell.greenest = g;
        if (!row.back().empty()) cell.savings_pct = parse_real(row.back());
        qps.insert(cell.qps);
        alpha.insert(cell.alpha);
        grid.cells.push_back(std::move(cell));
    }
    grid.qps_axis.assign(qps.begin(), qps.end());
    grid.alpha_axis.assign(alpha.begin(), alpha.end());
    if (grid.cells.size() != grid.qps_axis.size() * grid.alpha_axis.size()) {
        throw SpecError("grid CSV does not cover the full axis cross-product");
    }
    return grid;
}

}  // namespace fuel::compare
