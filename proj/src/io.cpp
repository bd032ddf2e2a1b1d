#include "bmkit/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bmkit/error.hpp"

namespace bmkit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Error parse_error(const std::string& what) { return Error(ErrorCode::parse, what); }

/// Non-finite doubles as strings, since JSON has no inf or nan.
ordered_json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& err) {
        throw parse_error(std::string(what) + ": " + err.what());
    }
}

template <class F>
auto guarded(const char* what, F&& body) {
    try {
        return body();
    } catch (const json::exception& err) {
        throw parse_error(std::string(what) + ": " + err.what());
    }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw parse_error(where + " must be a JSON object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) throw parse_error("unknown key '" + item.key() + "' in " + where);
    }
}

double exponent_value(const json& v, const std::string& name) {
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity")) return kInf;
    if (!v.is_number()) throw parse_error("exponent " + name + " must be a number or \"inf\"");
    return v.get<double>();
}

}  // namespace

std::string to_json(const GridFunction& f) {
    const auto& cfg = f.config();
    ordered_json out;
    out["n"] = cfg.n;
    out["J"] = cfg.J;
    out["j_min"] = cfg.j_min;
    out["d"] = f.dim();
    out["periodic"] = cfg.periodic;
    ordered_json values = ordered_json::array();
    for (std::size_t c = 0; c < f.cell_count(); ++c) {
        ordered_json cell = ordered_json::array();
        for (double v : f.cell(c)) cell.push_back(num(v));
        values.push_back(std::move(cell));
    }
    out["values"] = std::move(values);
    return out.dump();
}

GridFunction grid_function_from_json(const std::string& text) {
    const json doc = parse(text, "grid function");
    return guarded("grid function", [&] {
        reject_unknown(doc, {"n", "J", "j_min", "d", "periodic", "values"}, "grid function");
        for (const char* key : {"n", "J", "j_min", "d", "values"}) {
            if (!doc.contains(key)) throw parse_error(std::string("grid function is missing \"") + key + "\"");
        }
        LatticeConfig cfg;
        cfg.n = doc.at("n").get<int>();
        cfg.J = doc.at("J").get<int>();
        cfg.j_min = doc.at("j_min").get<int>();
        cfg.periodic = doc.value("periodic", true);
        cfg.validate();
        const int d = doc.at("d").get<int>();
        if (d < 1) throw parse_error("grid function needs d >= 1");
        const auto& values = doc.at("values");
        if (!values.is_array() || values.size() != cfg.cell_count()) {
            throw parse_error("grid function \"values\" must hold " + std::to_string(cfg.cell_count()) +
                              " cells (row-major), got " + std::to_string(values.is_array() ? values.size() : 0));
        }
        std::vector<double> flat;
        flat.reserve(cfg.cell_count() * static_cast<std::size_t>(d));
        for (std::size_t c = 0; c < values.size(); ++c) {
            const auto& cell = values[c];
            if (!cell.is_array() || cell.size() != static_cast<std::size_t>(d)) {
                throw parse_error("cell " + std::to_string(c) + " must hold " + std::to_string(d) + " values");
            }
            for (const auto& v : cell) {
                if (!v.is_number()) throw parse_error("cell " + std::to_string(c) + " holds a non-numeric value");
                const double x = v.get<double>();
                if (!std::isfinite(x)) throw parse_error("cell " + std::to_string(c) + " holds a non-finite value");
                flat.push_back(x);
            }
        }
        return GridFunction(Lattice::make(cfg), d, std::move(flat));
    });
}

std::string to_json(const BlockDecomposition& dec) {
    ordered_json out = ordered_json::array();
    for (const auto& entry : dec.entries) {
        const auto& lat = *entry.block.lattice();
        ordered_json item;
        item["j"] = entry.cube.j;
        ordered_json m = ordered_json::array();
        for (int i = 0; i < lat.n(); ++i) m.push_back(entry.cube.m[static_cast<std::size_t>(i)]);
        item["m"] = std::move(m);
        item["lambda"] = num(entry.lambda);
        ordered_json values = ordered_json::array();
        for (auto c : lat.cube_cells(lat.cube_id(entry.cube))) {
            ordered_json cell = ordered_json::array();
            for (double v : entry.block.cell(c)) cell.push_back(num(v));
            values.push_back(std::move(cell));
        }
        item["block_values"] = std::move(values);
        out.push_back(std::move(item));
    }
    return out.dump();
}

BlockDecomposition decomposition_from_json(const std::string& text, const LatticePtr& lattice, int d) {
    const json doc = parse(text, "block decomposition");
    return guarded("block decomposition", [&] {
        if (!doc.is_array()) throw parse_error("block decomposition must be a JSON list");
        const auto& cfg = lattice->config();
        BlockDecomposition dec;
        for (std::size_t k = 0; k < doc.size(); ++k) {
            const auto& item = doc[k];
            const std::string where = "block decomposition entry " + std::to_string(k);
            reject_unknown(item, {"j", "m", "lambda", "block_values"}, where);
            CubeIndex cube;
            cube.j = item.at("j").get<int>();
            const auto& m = item.at("m");
            if (!m.is_array() || m.size() != static_cast<std::size_t>(cfg.n)) {
                throw parse_error(where + ": \"m\" must hold n = " + std::to_string(cfg.n) + " integers");
            }
            for (int i = 0; i < cfg.n; ++i) cube.m[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)].get<std::int64_t>();
            if (!in_family(cube, cfg)) throw parse_error(where + ": cube is outside the lattice family");
            BlockEntry entry{cube, item.at("lambda").get<double>(), GridFunction(lattice, d)};
            const auto cells = lattice->cube_cells(lattice->cube_id(cube));
            const auto& values = item.at("block_values");
            if (!values.is_array() || values.size() != cells.size()) {
                throw parse_error(where + ": \"block_values\" must hold " + std::to_string(cells.size()) + " cells");
            }
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const auto& cell = values[i];
                if (!cell.is_array() || cell.size() != static_cast<std::size_t>(d)) {
                    throw parse_error(where + ": each block cell must hold " + std::to_string(d) + " values");
                }
                for (int a = 0; a < d; ++a) entry.block.at(cells[i], a) = cell[static_cast<std::size_t>(a)].get<double>();
            }
            dec.entries.push_back(std::move(entry));
        }
        return dec;
    });
}

std::string to_json(const DualCertificate& cert) {
    ordered_json out;
    out["value"] = num(cert.value);
    out["f_star"] = ordered_json::parse(to_json(cert.f_star));
    return out.dump();
}

std::string to_csv(const CubeTermTable& table) {
    std::ostringstream os;
    os.precision(17);
    os << "j,m0,m1,term\n";
    for (const auto& row : table) {
        os << row.cube.j << ',' << row.cube.m[0] << ',' << row.cube.m[1] << ',' << row.term << '\n';
    }
    return os.str();
}

std::string report_json(const VerificationReport& report) {
    ordered_json out;
    out["schema_version"] = VerificationReport::kSchemaVersion;
    const auto& c = report.config;
    ordered_json cfg;
    cfg["seed"] = c.seed;
    cfg["corpus_scale"] = c.corpus_scale;
    cfg["checks"] = c.checks;
    cfg["solver"] = {{"tol", c.solver.tol}, {"max_iters", c.solver.max_iters}};
    cfg["distribution"] = c.distribution;
    cfg["sparsity"] = c.sparsity;
    cfg["tamper_translation_constant"] = c.tamper_translation_constant;
    out["config"] = std::move(cfg);
    out["overall"] = to_string(report.overall());
    ordered_json checks = ordered_json::array();
    for (const auto& r : report.checks) {
        ordered_json item;
        item["name"] = r.spec.name;
        item["anchor"] = r.spec.anchor;
        item["relation"] = to_string(r.spec.relation);
        item["tolerance"] = r.spec.tolerance;
        item["lattices"] = r.spec.lattices;
        item["exponents"] = r.spec.exponents;
        item["status"] = to_string(r.status);
        item["passed"] = r.passed;
        item["failed"] = r.failed;
        item["inconclusive"] = r.inconclusive;
        item["worst_ratio"] = num(r.worst_ratio);
        item["bound"] = num(r.bound);
        item["worst_fingerprint"] = r.worst_fingerprint;
        ordered_json stats = ordered_json::object();
        for (const auto& [k, v] : r.stats) stats[k] = num(v);
        item["stats"] = std::move(stats);
        ordered_json instances = ordered_json::array();
        for (const auto& rec : r.instances) {
            instances.push_back({{"index", rec.index},
                                 {"status", to_string(rec.status)},
                                 {"ratio", num(rec.ratio)},
                                 {"bound", num(rec.bound)},
                                 {"margin", num(rec.margin)},
                                 {"label", rec.label},
                                 {"fingerprint", rec.fingerprint}});
        }
        item["instances"] = std::move(instances);
        checks.push_back(std::move(item));
    }
    out["checks"] = std::move(checks);
    return out.dump(2) + "\n";
}

std::string report_timing_json(const VerificationReport& report) {
    ordered_json out;
    out["schema_version"] = VerificationReport::kSchemaVersion;
    out["total_seconds"] = report.seconds;
    ordered_json checks = ordered_json::object();
    for (const auto& r : report.checks) checks[r.spec.name] = r.seconds;
    out["check_seconds"] = std::move(checks);
    return out.dump(2) + "\n";
}

std::string report_csv(const VerificationReport& report) {
    std::ostringstream os;
    os.precision(17);
    os << "check,instance,ratio,bound,status,fingerprint\n";
    for (const auto& r : report.checks) {
        for (const auto& rec : r.instances) {
            os << r.spec.name << ',' << rec.index << ',' << rec.ratio << ',' << rec.bound << ','
               << to_string(rec.status) << ',' << rec.fingerprint << '\n';
        }
    }
    return os.str();
}

ExponentSet RunConfig::exponents() const { return ExponentSet::make(p, t, r, q, eta); }

void RunConfig::validate_ranges() const {
    lattice.validate();
    exponents();
    if (d < 1) throw Error(ErrorCode::domain, "exponents.d must be >= 1");
    if (!(solver.tol > 0.0) || solver.max_iters < 1) {
        throw Error(ErrorCode::domain, "solver needs tol > 0 and max_iters >= 1");
    }
    if (!(corpus_scale >= 0.0)) throw Error(ErrorCode::domain, "corpus.scale must be >= 0");
    if (corpus_size < 1) throw Error(ErrorCode::domain, "corpus.size must be >= 1");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw Error(ErrorCode::domain, "corpus.sparsity must lie in [0, 1)");
    if (distribution != "mixture" && distribution != "dense" && distribution != "sparse" &&
        distribution != "single_block") {
        throw Error(ErrorCode::domain, "corpus.distribution must be mixture, dense, sparse or single_block");
    }
    if (levels < 1) throw Error(ErrorCode::domain, "experiment.levels must be >= 1");
}

void RunConfig::validate(bool block_side) const {
    validate_ranges();
    const auto e = exponents();
    if (!e.nontrivial()) {
        throw Error(ErrorCode::regime, "exponents " + e.describe() + " give the zero space: " + kDichotomy);
    }
    if (block_side) e.require_block_regime();
}

VerifyConfig RunConfig::verify_config() const {
    VerifyConfig v;
    v.seed = seed;
    v.corpus_scale = corpus_scale;
    v.solver = solver;
    v.distribution = distribution;
    v.sparsity = sparsity;
    return v;
}

RunConfig run_config_from_json(const std::string& text) {
    const json doc = parse(text, "config");
    return guarded("config", [&] {
        reject_unknown(doc, {"lattice", "exponents", "solver", "corpus", "experiment", "output"}, "config");
        RunConfig c;
        if (doc.contains("lattice")) {
            const auto& l = doc.at("lattice");
            reject_unknown(l, {"n", "J", "j_min", "periodic"}, "config.lattice");
            c.lattice.n = l.value("n", c.lattice.n);
            c.lattice.J = l.value("J", c.lattice.J);
            c.lattice.j_min = l.value("j_min", c.lattice.j_min);
            c.lattice.periodic = l.value("periodic", c.lattice.periodic);
        }
        if (doc.contains("exponents")) {
            const auto& x = doc.at("exponents");
            reject_unknown(x, {"p", "t", "r", "q", "eta", "d"}, "config.exponents");
            if (x.contains("p")) c.p = exponent_value(x.at("p"), "p");
            if (x.contains("t")) c.t = exponent_value(x.at("t"), "t");
            if (x.contains("r")) c.r = exponent_value(x.at("r"), "r");
            if (x.contains("q")) c.q = exponent_value(x.at("q"), "q");
            if (x.contains("eta") && !x.at("eta").is_null()) c.eta = x.at("eta").get<double>();
            c.d = x.value("d", c.d);
        }
        if (doc.contains("solver")) {
            const auto& s = doc.at("solver");
            reject_unknown(s, {"tol", "max_iters", "seed"}, "config.solver");
            c.solver.tol = s.value("tol", c.solver.tol);
            c.solver.max_iters = s.value("max_iters", c.solver.max_iters);
            c.seed = s.value("seed", c.seed);
        }
        if (doc.contains("corpus")) {
            const auto& s = doc.at("corpus");
            reject_unknown(s, {"scale", "size", "distribution", "sparsity"}, "config.corpus");
            c.corpus_scale = s.value("scale", c.corpus_scale);
            c.corpus_size = s.value("size", c.corpus_size);
            c.distribution = s.value("distribution", c.distribution);
            c.sparsity = s.value("sparsity", c.sparsity);
        }
        if (doc.contains("experiment")) {
            const auto& s = doc.at("experiment");
            reject_unknown(s, {"levels"}, "config.experiment");
            c.levels = s.value("levels", c.levels);
        }
        if (doc.contains("output")) {
            const auto& s = doc.at("output");
            reject_unknown(s, {"dir"}, "config.output");
            c.out_dir = s.value("dir", c.out_dir);
        }
        return c;
    });
}

std::string to_json(const RunConfig& c) {
    ordered_json out;
    out["lattice"] = {{"n", c.lattice.n}, {"J", c.lattice.J}, {"j_min", c.lattice.j_min}, {"periodic", c.lattice.periodic}};
    ordered_json x;
    x["p"] = num(c.p);
    x["t"] = num(c.t);
    x["r"] = num(c.r);
    x["q"] = num(c.q);
    x["eta"] = c.eta ? ordered_json(*c.eta) : ordered_json(nullptr);
    x["d"] = c.d;
    out["exponents"] = std::move(x);
    out["solver"] = {{"tol", c.solver.tol}, {"max_iters", c.solver.max_iters}, {"seed", c.seed}};
    out["corpus"] = {{"scale", c.corpus_scale}, {"size", c.corpus_size}, {"distribution", c.distribution},
                     {"sparsity", c.sparsity}};
    out["experiment"] = {{"levels", c.levels}};
    out["output"] = {{"dir", c.out_dir}};
    return out.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "' for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    std::error_code ec;
    if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io, "cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::io, "failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::io, "cannot move '" + tmp.string() + "' to '" + path + "'");
    }
}

}  // namespace bmkit
