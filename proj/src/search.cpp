#include "mstan/search.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "mstan/errors.hpp"
#include "mstan/parser.hpp"

namespace mstan {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

// Path of a fresh temporary file holding `text`; removed on destruction.
class TempFile {
public:
    explicit TempFile(const std::string& text) {
        const char* dir = std::getenv("TMPDIR");
        std::string tmpl = std::string(dir && *dir ? dir : "/tmp") + "/mstan-XXXXXX.stan";
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        int fd = mkstemps(buf.data(), 5);
        if (fd < 0) throw CompileError("SCORER_FAILED", "cannot create a temporary file");
        ::close(fd);
        path_ = buf.data();
        std::ofstream(path_) << text;
    }
    ~TempFile() { std::remove(path_.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace

double parameter_count(const std::string& program) {
    Ast ast = parse(program);
    const Block* b = ast.find_block(BlockKind::Parameters);
    if (!b) return 0;
    return static_cast<double>(
        std::count_if(b->stmts.begin(), b->stmts.end(), [](const Stmt& s) { return s.kind == Stmt::Kind::Decl; }));
}

ScoreFn parameter_count_scorer() {
    return [](const std::string&, const std::string& program) { return parameter_count(program); };
}

ScoreFn external_scorer(ExternalScorerConfig config) {
    return [config](const std::string& selection, const std::string& program) {
        TempFile file(program);
        std::string quoted = shell_quote(file.path());
        std::string cmd = config.command;
        auto at = cmd.find("{file}");
        if (at == std::string::npos) {
            cmd += " " + quoted;
        } else {
            while (at != std::string::npos) {
                cmd.replace(at, 6, quoted);
                at = cmd.find("{file}", at + quoted.size());
            }
        }
        if (config.timeout_seconds > 0)
            cmd = "timeout " + std::to_string(config.timeout_seconds) + " sh -c " + shell_quote(cmd);
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) throw CompileError("SCORER_FAILED", "cannot run scorer for " + selection);
        std::string out;
        char buf[4096];
        while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
        int status = ::pclose(pipe);
        if (status != 0) {
            int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
            throw CompileError("SCORER_FAILED",
                               "scorer exited with status " + std::to_string(code) + " for " + selection);
        }
        // the number is the first word of the last non-empty line
        std::string text = trim(out);
        text = trim(text.substr(text.find_last_of('\n') == std::string::npos ? 0 : text.find_last_of('\n') + 1));
        text = text.substr(0, text.find_first_of(" \t"));
        try {
            std::size_t used = 0;
            double v = std::stod(text, &used);
            if (used == text.size()) return v;
        } catch (const std::exception&) {
        }
        throw CompileError("SCORER_FAILED", "scorer printed '" + text + "' for " + selection + "; expected a number");
    };
}

double Scorer::score(const Expansion& x, const SelectionSpec& spec) {
    std::string key = spec.text();
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    double v = fn_(key, x.concretize(spec));
    std::lock_guard<std::mutex> lock(mu_);
    if (cache_.emplace(key, v).second) ++evaluations_;
    return v;
}

std::size_t Scorer::evaluations() const {
    std::lock_guard<std::mutex> lock(mu_);
    return evaluations_;
}

std::optional<double> Scorer::cached(const std::string& selection) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(selection);
    if (it == cache_.end()) return std::nullopt;
    return it->second;
}

SelectionSpec default_start(const Expansion& x) {
    CoreProgram core = x.skeleton();
    const ModularProgram& p = core.program;
    Selection sel;
    std::vector<int> todo(p.base_holes().begin(), p.base_holes().end());
    while (!todo.empty()) {
        int h = todo.back();
        todo.pop_back();
        if (sel.count(p.hole_name(h)) || p.impls(h).empty()) continue;
        int i = p.impls(h)[0];
        sel[p.hole_name(h)] = p.impl_name(i);
        for (int c : p.holes_of(i)) todo.push_back(c);
    }
    return x.inverse(sel, core);
}

SearchTrace greedy_search(const Expansion& x, const SelectionSpec& start, Scorer& scorer, int jobs) {
    SearchTrace trace;
    std::size_t before = scorer.evaluations();
    std::map<std::string, double> seen;
    auto record = [&](const std::string& sel, double v) {
        if (seen.emplace(sel, v).second) trace.visited.push_back({sel, v});
    };
    auto finish = [&]() -> SearchTrace& {
        trace.evaluations = scorer.evaluations() - before;
        return trace;
    };

    SelectionSpec spec = x.normalize(start);
    std::string current = spec.text();
    trace.path.push_back(current);
    trace.result = current;
    try {
        record(current, scorer.score(x, spec));
    } catch (const std::exception& e) {
        trace.error = e.what();
        return finish();
    }
    while (true) {
        auto ns = x.neighbors(parse_selection(current));
        std::vector<double> scores(ns.size());
        std::vector<std::string> errors(ns.size());
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (std::size_t k; (k = next++) < ns.size();) {
                try {
                    scores[k] = scorer.score(x, ns[k]);
                } catch (const std::exception& e) {
                    errors[k] = e.what();
                }
            }
        };
        int threads = std::max(1, std::min<int>(jobs, static_cast<int>(ns.size())));
        std::vector<std::thread> pool;
        for (int t = 1; t < threads; ++t) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        for (std::size_t k = 0; k < ns.size(); ++k) {
            if (!errors[k].empty()) {
                trace.error = errors[k];
                return finish();
            }
            record(ns[k].text(), scores[k]);
        }
        // std::map iterates in canonical order, so the first maximum wins ties
        auto best = seen.begin();
        for (auto it = seen.begin(); it != seen.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        if (!(best->second > seen.at(current))) break;
        current = best->first;
        trace.path.push_back(current);
        trace.result = current;
    }
    return finish();
}

std::string trace_json(const SearchTrace& t) {
    nlohmann::ordered_json j;
    j["result"] = t.result;
    j["evaluations"] = t.evaluations;
    j["path"] = t.path;
    auto visited = nlohmann::ordered_json::array();
    for (const auto& v : t.visited) visited.push_back({{"selection", v.selection}, {"score", v.score}});
    j["visited"] = visited;
    if (t.error) j["error"] = *t.error;
    return j.dump(2);
}

}  // namespace mstan
