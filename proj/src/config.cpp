#include "bayesagg/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bayesagg::config {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& field, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(field, "expected a number, got '" + v + "'");
    }
}

long to_long(const std::string& field, const std::string& v) {
    try {
        std::size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(field, "expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& field, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(field, "expected a boolean, got '" + v + "'");
}

TaskKind kind_from_string(const std::string& field, const std::string& v) {
    if (v == "regression" || v == "reg") return TaskKind::kRegression;
    if (v == "binary" || v == "bin") return TaskKind::kBinary;
    if (v == "multiclass" || v == "mc") return TaskKind::kMulticlass;
    throw ConfigError(field, "unknown task kind '" + v + "'");
}

std::string kind_to_string(TaskKind k) {
    switch (k) {
        case TaskKind::kRegression: return "regression";
        case TaskKind::kBinary: return "binary";
        case TaskKind::kMulticlass: return "multiclass";
    }
    return "?";
}

// Looks a value up, applying `fn` when present.
template <typename Fn>
void with_key(const SectionMap& sections, const std::string& section, const std::string& key,
              const Fn& fn) {
    const auto sit = sections.find(section);
    if (sit == sections.end()) return;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return;
    fn(section + "." + key, kit->second);
}

}  // namespace

SectionMap parse_ini(const std::string& text) {
    SectionMap out;
    std::stringstream ss(text);
    std::string line;
    std::string section;
    long lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno), "empty key");
        }
        out[section][key] = value;
    }
    return out;
}

SectionMap parse_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_ini(buf.str());
}

std::vector<SyntheticTaskSpec> parse_synthetic_tasks(const std::string& text) {
    std::vector<SyntheticTaskSpec> out;
    for (const std::string& item : split_list(text)) {
        std::vector<std::string> parts;
        std::stringstream ss(item);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(trim(p));
        if (parts.empty() || parts.size() > 4) {
            throw ConfigError("dataset.tasks", "expected kind:outputs[:noise[:angle]], got '" +
                                                   item + "'");
        }
        SyntheticTaskSpec t;
        t.kind = kind_from_string("dataset.tasks", parts[0]);
        if (parts.size() > 1) t.outputs = to_long("dataset.tasks", parts[1]);
        if (parts.size() > 2) t.noise = to_double("dataset.tasks", parts[2]);
        if (parts.size() > 3) t.conflict_angle = to_double("dataset.tasks", parts[3]);
        if (t.outputs < 1) throw ConfigError("dataset.tasks", "outputs must be >= 1");
        if (t.kind == TaskKind::kMulticlass && t.outputs < 2) {
            throw ConfigError("dataset.tasks", "multiclass needs >= 2 classes");
        }
        out.push_back(t);
    }
    if (out.empty()) throw ConfigError("dataset.tasks", "no tasks declared");
    return out;
}

std::vector<TaskSpec> parse_csv_tasks(const std::string& text) {
    std::vector<TaskSpec> out;
    int id = 0;
    for (const std::string& item : split_list(text)) {
        std::vector<std::string> parts;
        std::stringstream ss(item);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(trim(p));
        if (parts.empty() || parts.size() > 2) {
            throw ConfigError("dataset.tasks", "expected kind:outputs, got '" + item + "'");
        }
        TaskSpec t;
        t.name = "task" + std::to_string(id++);
        t.kind = kind_from_string("dataset.tasks", parts[0]);
        if (parts.size() > 1) t.outputs = to_long("dataset.tasks", parts[1]);
        out.push_back(t);
    }
    if (out.empty()) throw ConfigError("dataset.tasks", "no tasks declared");
    return out;
}

RunConfig from_sections(const SectionMap& sections) {
    RunConfig cfg;

    // dataset
    with_key(sections, "dataset", "source", [&](const std::string& f, const std::string& v) {
        if (v == "synthetic") {
            cfg.dataset.source = DatasetConfig::Source::kSynthetic;
        } else if (v == "csv") {
            cfg.dataset.source = DatasetConfig::Source::kCsv;
        } else {
            throw ConfigError(f, "expected 'synthetic' or 'csv'");
        }
    });
    with_key(sections, "dataset", "n", [&](const std::string& f, const std::string& v) {
        cfg.dataset.synthetic.n = to_long(f, v);
    });
    with_key(sections, "dataset", "input_dim", [&](const std::string& f, const std::string& v) {
        cfg.dataset.synthetic.input_dim = to_long(f, v);
    });
    with_key(sections, "dataset", "path", [&](const std::string&, const std::string& v) {
        cfg.dataset.csv_path = v;
    });
    with_key(sections, "dataset", "tasks", [&](const std::string&, const std::string& v) {
        if (cfg.dataset.source == DatasetConfig::Source::kSynthetic) {
            cfg.dataset.synthetic.tasks = parse_synthetic_tasks(v);
        } else {
            cfg.dataset.csv_tasks = parse_csv_tasks(v);
        }
    });
    with_key(sections, "dataset", "train_frac", [&](const std::string& f, const std::string& v) {
        cfg.dataset.train_frac = to_double(f, v);
    });
    with_key(sections, "dataset", "val_frac", [&](const std::string& f, const std::string& v) {
        cfg.dataset.val_frac = to_double(f, v);
    });
    with_key(sections, "dataset", "normalize", [&](const std::string& f, const std::string& v) {
        cfg.dataset.normalize = to_bool(f, v);
    });
    with_key(sections, "dataset", "data_seed", [&](const std::string& f, const std::string& v) {
        cfg.dataset.data_seed = static_cast<std::uint64_t>(to_long(f, v));
    });
    cfg.dataset.synthetic.seed = cfg.dataset.data_seed;

    // model
    with_key(sections, "model", "widths", [&](const std::string& f, const std::string& v) {
        cfg.model.widths.clear();
        for (const std::string& w : split_list(v)) {
            cfg.model.widths.push_back(to_long(f, w));
        }
        if (cfg.model.widths.empty()) throw ConfigError(f, "at least one width required");
    });
    with_key(sections, "model", "activation", [&](const std::string&, const std::string& v) {
        cfg.model.activation = activation_from_string(v);
    });

    // training
    TrainConfig& tr = cfg.training;
    with_key(sections, "training", "epochs",
             [&](const std::string& f, const std::string& v) { tr.epochs = to_long(f, v); });
    with_key(sections, "training", "pretrain_epochs", [&](const std::string& f,
                                                          const std::string& v) {
        tr.pretrain_epochs = to_long(f, v);
    });
    with_key(sections, "training", "batch_size",
             [&](const std::string& f, const std::string& v) { tr.batch_size = to_long(f, v); });
    with_key(sections, "training", "lr",
             [&](const std::string& f, const std::string& v) { tr.adam.lr = to_double(f, v); });
    with_key(sections, "training", "weight_decay", [&](const std::string& f,
                                                       const std::string& v) {
        tr.adam.weight_decay = to_double(f, v);
    });
    with_key(sections, "training", "beta1",
             [&](const std::string& f, const std::string& v) { tr.adam.beta1 = to_double(f, v); });
    with_key(sections, "training", "beta2",
             [&](const std::string& f, const std::string& v) { tr.adam.beta2 = to_double(f, v); });
    with_key(sections, "training", "adam_eps",
             [&](const std::string& f, const std::string& v) { tr.adam.eps = to_double(f, v); });
    with_key(sections, "training", "scheduler", [&](const std::string& f, const std::string& v) {
        if (v == "none") {
            tr.scheduler.kind = SchedulerKind::kNone;
        } else if (v == "step") {
            tr.scheduler.kind = SchedulerKind::kStep;
        } else if (v == "plateau") {
            tr.scheduler.kind = SchedulerKind::kPlateau;
        } else {
            throw ConfigError(f, "expected none|step|plateau");
        }
    });
    with_key(sections, "training", "scheduler_factor", [&](const std::string& f,
                                                           const std::string& v) {
        tr.scheduler.factor = to_double(f, v);
    });
    with_key(sections, "training", "scheduler_step_every", [&](const std::string& f,
                                                               const std::string& v) {
        tr.scheduler.step_every = static_cast<int>(to_long(f, v));
    });
    with_key(sections, "training", "scheduler_patience", [&](const std::string& f,
                                                             const std::string& v) {
        tr.scheduler.patience = static_cast<int>(to_long(f, v));
    });
    with_key(sections, "training", "select_best", [&](const std::string& f, const std::string& v) {
        tr.select_best = to_bool(f, v);
    });

    // method
    MethodConfig& m = tr.method;
    with_key(sections, "method", "name", [&](const std::string& f, const std::string& v) {
        try {
            m.method = method_from_string(v);
        } catch (const UnknownMethodError& e) {
            throw ConfigError(f, e.what());
        }
    });
    with_key(sections, "method", "s", [&](const std::string& f, const std::string& v) {
        m.s_regression = m.s_classification = to_double(f, v);
    });
    with_key(sections, "method", "s_regression", [&](const std::string& f, const std::string& v) {
        m.s_regression = to_double(f, v);
    });
    with_key(sections, "method", "s_classification",
             [&](const std::string& f, const std::string& v) {
                 m.s_classification = to_double(f, v);
             });
    with_key(sections, "method", "mc_samples",
             [&](const std::string& f, const std::string& v) { m.mc_samples = to_long(f, v); });
    with_key(sections, "method", "prior_variance", [&](const std::string& f,
                                                       const std::string& v) {
        m.prior_variance = to_double(f, v);
    });
    with_key(sections, "method", "tau",
             [&](const std::string& f, const std::string& v) { m.tau = to_double(f, v); });
    with_key(sections, "method", "mode", [&](const std::string& f, const std::string& v) {
        if (v == "diagonal") {
            m.mode = MomentMode::kDiagonal;
        } else if (v == "full") {
            m.mode = MomentMode::kFull;
        } else {
            throw ConfigError(f, "expected diagonal|full");
        }
    });
    with_key(sections, "method", "epsilon",
             [&](const std::string& f, const std::string& v) { m.epsilon = to_double(f, v); });
    with_key(sections, "method", "newton_damping", [&](const std::string& f,
                                                       const std::string& v) {
        m.newton_damping = to_double(f, v);
    });

    // output
    with_key(sections, "output", "dir",
             [&](const std::string&, const std::string& v) { cfg.out_dir = v; });
    with_key(sections, "output", "seeds", [&](const std::string& f, const std::string& v) {
        cfg.seeds.clear();
        for (const std::string& s : split_list(v)) {
            cfg.seeds.push_back(static_cast<std::uint64_t>(to_long(f, s)));
        }
        if (cfg.seeds.empty()) throw ConfigError(f, "at least one seed required");
    });

    // optional fixed STL references
    with_key(sections, "stl", "values", [&](const std::string& f, const std::string& v) {
        const auto items = split_list(v);
        Vector vals(static_cast<Index>(items.size()));
        for (std::size_t i = 0; i < items.size(); ++i) {
            vals(static_cast<Index>(i)) = to_double(f, items[i]);
        }
        cfg.stl_values = vals;
    });

    // validation
    if (cfg.dataset.source == DatasetConfig::Source::kSynthetic) {
        if (cfg.dataset.synthetic.tasks.empty()) {
            throw ConfigError("dataset.tasks", "synthetic dataset needs a task list");
        }
        if (cfg.dataset.synthetic.n <= 0) throw ConfigError("dataset.n", "must be positive");
    } else if (cfg.dataset.csv_path.empty()) {
        throw ConfigError("dataset.path", "csv dataset needs a path");
    } else if (cfg.dataset.csv_tasks.empty()) {
        throw ConfigError("dataset.tasks", "csv dataset needs a task list");
    }
    if (tr.epochs < 1) throw ConfigError("training.epochs", "must be >= 1");
    if (tr.pretrain_epochs < 0 || tr.pretrain_epochs >= tr.epochs) {
        throw ConfigError("training.pretrain_epochs", "must satisfy 0 <= pretrain < epochs");
    }
    if (tr.batch_size < 1) throw ConfigError("training.batch_size", "must be >= 1");
    if (m.s_regression < 0.0 || m.s_regression > 1.0 || m.s_classification < 0.0 ||
        m.s_classification > 1.0) {
        throw ConfigError("method.s", "temper exponents must lie in [0, 1]");
    }
    if (m.mc_samples < 2) throw ConfigError("method.mc_samples", "must be >= 2");
    if (cfg.dataset.train_frac <= 0.0 ||
        cfg.dataset.train_frac + cfg.dataset.val_frac > 1.0 + 1e-12) {
        throw ConfigError("dataset.train_frac", "fractions must fit in (0, 1]");
    }
    return cfg;
}

RunConfig load(const std::string& path) { return from_sections(parse_ini_file(path)); }

std::string resolved_text(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[dataset]\n";
    if (cfg.dataset.source == DatasetConfig::Source::kSynthetic) {
        out << "source = synthetic\n";
        out << "n = " << cfg.dataset.synthetic.n << "\n";
        out << "input_dim = " << cfg.dataset.synthetic.input_dim << "\n";
        out << "tasks = ";
        bool first = true;
        for (const auto& t : cfg.dataset.synthetic.tasks) {
            if (!first) out << ", ";
            out << kind_to_string(t.kind) << ":" << t.outputs << ":" << t.noise << ":"
                << t.conflict_angle;
            first = false;
        }
        out << "\n";
    } else {
        out << "source = csv\n";
        out << "path = " << cfg.dataset.csv_path << "\n";
        out << "tasks = ";
        bool first = true;
        for (const auto& t : cfg.dataset.csv_tasks) {
            if (!first) out << ", ";
            out << kind_to_string(t.kind) << ":" << t.outputs;
            first = false;
        }
        out << "\n";
    }
    out << "train_frac = " << cfg.dataset.train_frac << "\n";
    out << "val_frac = " << cfg.dataset.val_frac << "\n";
    out << "normalize = " << (cfg.dataset.normalize ? "true" : "false") << "\n";
    out << "data_seed = " << cfg.dataset.data_seed << "\n";

    out << "[model]\n";
    out << "widths = ";
    for (std::size_t i = 0; i < cfg.model.widths.size(); ++i) {
        if (i) out << ", ";
        out << cfg.model.widths[i];
    }
    out << "\n";
    out << "activation = " << to_string(cfg.model.activation) << "\n";

    const TrainConfig& tr = cfg.training;
    out << "[training]\n";
    out << "epochs = " << tr.epochs << "\n";
    out << "pretrain_epochs = " << tr.pretrain_epochs << "\n";
    out << "batch_size = " << tr.batch_size << "\n";
    out << "lr = " << tr.adam.lr << "\n";
    out << "weight_decay = " << tr.adam.weight_decay << "\n";
    out << "beta1 = " << tr.adam.beta1 << "\n";
    out << "beta2 = " << tr.adam.beta2 << "\n";
    out << "adam_eps = " << tr.adam.eps << "\n";
    out << "scheduler = "
        << (tr.scheduler.kind == SchedulerKind::kNone
                ? "none"
                : tr.scheduler.kind == SchedulerKind::kStep ? "step" : "plateau")
        << "\n";
    out << "scheduler_factor = " << tr.scheduler.factor << "\n";
    out << "scheduler_step_every = " << tr.scheduler.step_every << "\n";
    out << "scheduler_patience = " << tr.scheduler.patience << "\n";
    out << "select_best = " << (tr.select_best ? "true" : "false") << "\n";

    const MethodConfig& m = tr.method;
    out << "[method]\n";
    out << "name = " << to_string(m.method) << "\n";
    out << "s_regression = " << m.s_regression << "\n";
    out << "s_classification = " << m.s_classification << "\n";
    out << "mc_samples = " << m.mc_samples << "\n";
    out << "prior_variance = " << m.prior_variance << "\n";
    out << "tau = " << m.tau << "\n";
    out << "mode = " << (m.mode == MomentMode::kDiagonal ? "diagonal" : "full") << "\n";
    out << "epsilon = " << m.epsilon << "\n";
    out << "newton_damping = " << m.newton_damping << "\n";

    out << "[output]\n";
    out << "dir = " << cfg.out_dir << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) out << ", ";
        out << cfg.seeds[i];
    }
    out << "\n";
    if (cfg.stl_values) {
        out << "[stl]\n";
        out << "values = ";
        for (Index i = 0; i < cfg.stl_values->size(); ++i) {
            if (i) out << ", ";
            out << (*cfg.stl_values)(i);
        }
        out << "\n";
    }
    return out.str();
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    std::ostringstream out;
    out << std::hex << fnv1a(resolved_text(cfg));
    return out.str();
}

std::string GridCell::label() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [k, v] : values) {
        if (!first) out << "_";
        out << k << "=" << v;
        first = false;
    }
    return out.str();
}

std::vector<GridCell> load_grid(const std::string& path) {
    const SectionMap sections = parse_ini_file(path);
    std::map<std::string, std::vector<double>> axes;
    for (const auto& [section, kv] : sections) {
        for (const auto& [key, value] : kv) {
            if (key != "s" && key != "s_regression" && key != "s_classification" &&
                key != "mc_samples" && key != "prior_variance") {
                throw ConfigError("grid." + key, "unsupported grid axis");
            }
            std::vector<double> vals;
            for (const std::string& v : split_list(value)) {
                vals.push_back(to_double("grid." + key, v));
            }
            if (vals.empty()) throw ConfigError("grid." + key, "empty value list");
            axes[key] = vals;
        }
    }
    if (axes.empty()) throw ConfigError("grid", "no axes declared");
    std::vector<GridCell> cells{GridCell{}};
    for (const auto& [key, vals] : axes) {
        std::vector<GridCell> next;
        for (const GridCell& cell : cells) {
            for (double v : vals) {
                GridCell c = cell;
                c.values[key] = v;
                next.push_back(std::move(c));
            }
        }
        cells = std::move(next);
    }
    return cells;
}

void apply_cell(RunConfig& cfg, const GridCell& cell) {
    MethodConfig& m = cfg.training.method;
    for (const auto& [key, v] : cell.values) {
        if (key == "s") {
            m.s_regression = m.s_classification = v;
        } else if (key == "s_regression") {
            m.s_regression = v;
        } else if (key == "s_classification") {
            m.s_classification = v;
        } else if (key == "mc_samples") {
            m.mc_samples = static_cast<Index>(v);
        } else if (key == "prior_variance") {
            m.prior_variance = v;
        }
    }
}

}  // namespace bayesagg::config
