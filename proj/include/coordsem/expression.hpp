#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coordsem::expr {

enum class CountFn { SourceIn, SourceAfter, SourceBefore, SourceTotal, TargetActive };

[[nodiscard]] std::string_view to_string(CountFn f);
[[nodiscard]] bool is_target_fn(CountFn f);

enum class Op { Int, Count, Add, Sub, Lt, Le, Eq, Ne, Ge, Gt, And, Or, Not };

struct Node {
    Op op = Op::Int;
    std::int64_t value = 0;
    CountFn fn = CountFn::SourceIn;
    std::string state;       // optional argument of a counting function, empty = the step's own state
    int state_index = -1;    // resolved by the model compiler, -1 = the step's own state
    int lhs = -1;
    int rhs = -1;
};

struct ParseError : std::runtime_error {
    std::size_t column;
    ParseError(const std::string& what, std::size_t col) : std::runtime_error(what), column(col) {}
};

// Counting callback. state_index -1 means the state of the step the component refers to.
class Counter {
public:
    virtual ~Counter() = default;
    [[nodiscard]] virtual std::int64_t count(CountFn fn, int state_index) const = 0;
};

// A lambda expression as a flat node array. Copying an Expr copies the whole tree,
// so each component instance owns its private copy.
class Expr {
public:
    Expr() = default;

    static Expr parse(std::string_view text);

    [[nodiscard]] bool evaluate(const Counter& c) const;
    [[nodiscard]] const std::string& text() const { return text_; }
    [[nodiscard]] bool empty() const { return nodes_.empty(); }

    // Counting functions used, in node order (the compiler resolves their state names).
    [[nodiscard]] std::vector<Node*> counting_nodes();
    [[nodiscard]] std::vector<const Node*> counting_nodes() const;

    [[nodiscard]] std::string to_canonical() const;

private:
    friend class Parser;
    [[nodiscard]] std::int64_t eval_int(int n, const Counter& c) const;
    [[nodiscard]] bool eval_bool(int n, const Counter& c) const;
    void render(int n, std::string& out) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

}  // namespace coordsem::expr
