#include "irobf/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <sstream>

namespace irobf {
namespace {

struct Token {
  enum class Kind { Ident, Reg, At, Int, Float, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int64_t ival = 0;
  double fval = 0.0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

// Tokenizes one source line. ';' starts a comment.
class LineLexer {
 public:
  LineLexer(const std::string& line, int lineno) : line_(line), lineno_(lineno) {
    tokenize();
  }

  const Token& peek() const { return pos_ < toks_.size() ? toks_[pos_] : end_; }
  Token next() { return pos_ < toks_.size() ? toks_[pos_++] : end_; }
  bool at_end() const { return pos_ >= toks_.size(); }
  int lineno() const { return lineno_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(lineno_, msg); }

  Token expect(Token::Kind k, const std::string& what) {
    Token t = next();
    if (t.kind != k) fail("expected " + what);
    return t;
  }

  void expect_punct(const std::string& p) {
    Token t = next();
    if (t.kind != Token::Kind::Punct || t.text != p)
      fail("expected '" + p + "'");
  }

  bool accept_punct(const std::string& p) {
    if (peek().kind == Token::Kind::Punct && peek().text == p) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_ident(const std::string& w) {
    if (peek().kind == Token::Kind::Ident && peek().text == w) {
      ++pos_;
      return true;
    }
    return false;
  }

 private:
  void tokenize() {
    size_t i = 0;
    while (i < line_.size()) {
      char c = line_[i];
      if (c == ';') break;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      Token t;
      if (c == '%' || c == '@') {
        if (i + 1 >= line_.size() || !ident_start(line_[i + 1]))
          throw ParseError(lineno_, std::string("bad name after '") + c + "'");
        size_t j = i + 1;
        while (j < line_.size() && ident_char(line_[j])) ++j;
        t.kind = c == '%' ? Token::Kind::Reg : Token::Kind::At;
        t.text = line_.substr(i + 1, j - i - 1);
        i = j;
      } else if (ident_start(c)) {
        size_t j = i;
        while (j < line_.size() && ident_char(line_[j])) ++j;
        t.kind = Token::Kind::Ident;
        t.text = line_.substr(i, j - i);
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && i + 1 < line_.size() &&
                  std::isdigit(static_cast<unsigned char>(line_[i + 1])))) {
        size_t j = i + 1;
        bool is_float = false;
        while (j < line_.size()) {
          char d = line_[j];
          if (std::isdigit(static_cast<unsigned char>(d))) {
            ++j;
          } else if (d == '.' || d == 'e' || d == 'E') {
            is_float = true;
            ++j;
            if (j < line_.size() && (line_[j] == '+' || line_[j] == '-') &&
                (d == 'e' || d == 'E'))
              ++j;
          } else {
            break;
          }
        }
        std::string num = line_.substr(i, j - i);
        if (is_float) {
          t.kind = Token::Kind::Float;
          t.fval = std::strtod(num.c_str(), nullptr);
        } else {
          t.kind = Token::Kind::Int;
          errno = 0;
          t.ival = std::strtoll(num.c_str(), nullptr, 10);
          if (errno == ERANGE) throw ParseError(lineno_, "integer literal out of range");
        }
        t.text = num;
        i = j;
      } else if (c == '-' && i + 1 < line_.size() && line_[i + 1] == '>') {
        t.kind = Token::Kind::Punct;
        t.text = "->";
        i += 2;
      } else if (c == '.' && i + 2 < line_.size() && line_[i + 1] == '.' &&
                 line_[i + 2] == '.') {
        t.kind = Token::Kind::Punct;
        t.text = "...";
        i += 3;
      } else if (std::string("(){}[],:=").find(c) != std::string::npos) {
        t.kind = Token::Kind::Punct;
        t.text = std::string(1, c);
        ++i;
      } else {
        throw ParseError(lineno_, std::string("unexpected character '") + c + "'");
      }
      toks_.push_back(std::move(t));
    }
  }

  std::string line_;
  int lineno_;
  std::vector<Token> toks_;
  size_t pos_ = 0;
  Token end_;
};

class Parser {
 public:
  explicit Parser(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) lines_.emplace_back(++n, line);
  }

  IrModule run() {
    LineLexer lx = need_line("module header");
    if (!lx.accept_ident("module")) lx.fail("expected 'module <name>'");
    mod_.name = lx.expect(Token::Kind::Ident, "module name").text;
    end_of(lx);

    while (auto opt = take_line()) {
      LineLexer& l = *opt;
      if (l.accept_ident("global")) {
        parse_global(l);
      } else if (l.accept_ident("export")) {
        mod_.exported.insert(l.expect(Token::Kind::At, "@function").text);
        end_of(l);
      } else if (l.accept_ident("visible_ptr")) {
        mod_.visible_ptrs.insert(l.expect(Token::Kind::At, "@function").text);
        end_of(l);
      } else if (l.accept_ident("declare")) {
        parse_declare(l);
      } else if (l.accept_ident("func")) {
        parse_func(l);
      } else {
        l.fail("expected global/export/visible_ptr/declare/func");
      }
    }
    resolve();
    return std::move(mod_);
  }

 private:
  // Lines pending; empty/comment-only lines are skipped lazily.
  std::vector<std::pair<int, std::string>> lines_;
  size_t next_line_ = 0;
  IrModule mod_;

  std::optional<LineLexer> take_line() {
    while (next_line_ < lines_.size()) {
      LineLexer lx(lines_[next_line_].second, lines_[next_line_].first);
      ++next_line_;
      if (!lx.at_end()) return lx;
    }
    return std::nullopt;
  }

  LineLexer need_line(const std::string& what) {
    auto opt = take_line();
    if (!opt) {
      int ln = lines_.empty() ? 1 : lines_.back().first;
      throw ParseError(ln, "unexpected end of input, wanted " + what);
    }
    return *opt;
  }

  void end_of(LineLexer& l) {
    if (!l.at_end()) l.fail("trailing tokens");
  }

  IrType parse_type(LineLexer& l) {
    Token t = l.expect(Token::Kind::Ident, "type");
    auto ty = type_from_name(t.text);
    if (!ty) l.fail("unknown type '" + t.text + "'");
    return *ty;
  }

  Operand parse_operand(LineLexer& l) {
    const Token& p = l.peek();
    switch (p.kind) {
      case Token::Kind::Reg:
        return Operand::reg(l.next().text);
      case Token::Kind::Int:
        return Operand::imm_int(l.next().ival);
      case Token::Kind::Float:
        return Operand::imm_float(l.next().fval);
      case Token::Kind::At:
        return Operand::global(l.next().text);
      case Token::Kind::Ident:
        if (p.text == "null") {
          l.next();
          return Operand::null_ptr();
        }
        [[fallthrough]];
      default:
        l.fail("expected operand");
    }
  }

  // Integer tokens in float context are float literals ("const f64 3").
  Operand coerce_float(LineLexer& l, Operand o) {
    if (o.kind == Operand::Kind::ImmInt) {
      Operand f = Operand::imm_float(static_cast<double>(o.ival));
      return f;
    }
    (void)l;
    return o;
  }

  void parse_global(LineLexer& l) {
    GlobalVar g;
    g.name = l.expect(Token::Kind::At, "@name").text;
    l.expect_punct(":");
    g.type = parse_type(l);
    l.expect_punct("=");
    g.init = parse_operand(l);
    if (is_float(g.type)) g.init = coerce_float(l, g.init);
    if (is_int(g.type)) g.init.ival = normalize_int(g.init.ival, g.type);
    end_of(l);
    if (mod_.find_global(g.name)) l.fail("duplicate global @" + g.name);
    mod_.globals.push_back(std::move(g));
  }

  void parse_declare(LineLexer& l) {
    Function f;
    f.is_external = true;
    f.name = l.expect(Token::Kind::At, "@name").text;
    l.expect_punct("(");
    if (!l.accept_punct(")")) {
      int n = 0;
      do {
        if (l.accept_punct("...")) {
          f.is_variadic = true;
          break;
        }
        Param p;
        p.type = parse_type(l);
        p.name = "a" + std::to_string(n++);
        f.params.push_back(p);
      } while (l.accept_punct(","));
      l.expect_punct(")");
    }
    l.expect_punct("->");
    f.ret_type = parse_type(l);
    end_of(l);
    add_function(l, std::move(f));
  }

  void parse_func(LineLexer& l) {
    Function f;
    f.name = l.expect(Token::Kind::At, "@name").text;
    l.expect_punct("(");
    if (!l.accept_punct(")")) {
      do {
        if (l.accept_punct("...")) {
          f.is_variadic = true;
          break;
        }
        Param p;
        p.name = l.expect(Token::Kind::Reg, "%param").text;
        l.expect_punct(":");
        p.type = parse_type(l);
        f.params.push_back(std::move(p));
      } while (l.accept_punct(","));
      l.expect_punct(")");
    }
    l.expect_punct("->");
    f.ret_type = parse_type(l);
    if (l.accept_ident("fusemap")) {
      FuseMap fm;
      fm.left = parse_int_list(l);
      fm.right = parse_int_list(l);
      f.fuse_map = std::move(fm);
    }
    l.expect_punct("{");
    end_of(l);
    parse_body(f);
    add_function(l, std::move(f));
  }

  std::vector<int> parse_int_list(LineLexer& l) {
    std::vector<int> out;
    l.expect_punct("[");
    if (!l.accept_punct("]")) {
      do {
        out.push_back(static_cast<int>(l.expect(Token::Kind::Int, "index").ival));
      } while (l.accept_punct(","));
      l.expect_punct("]");
    }
    return out;
  }

  void parse_body(Function& f) {
    bool seen_label = false;
    BasicBlock* cur = nullptr;
    bool terminated = false;
    for (;;) {
      LineLexer l = need_line("function body");
      if (l.accept_punct("}")) {
        end_of(l);
        if (cur && !terminated) l.fail("block '" + cur->label + "' lacks a terminator");
        if (f.blocks.empty()) l.fail("function @" + f.name + " has no blocks");
        return;
      }
      if (l.accept_ident("slot")) {
        if (seen_label) l.fail("slot declarations must precede the first block");
        SlotDecl s;
        s.name = l.expect(Token::Kind::Reg, "%slot").text;
        l.expect_punct(":");
        s.type = parse_type(l);
        if (s.type == IrType::Void) l.fail("slot of type void");
        end_of(l);
        if (f.slot_index(s.name) >= 0) l.fail("duplicate slot %" + s.name);
        f.slots.push_back(std::move(s));
        continue;
      }
      // A label line: single identifier followed by ':'.
      if (l.peek().kind == Token::Kind::Ident) {
        LineLexer probe = l;
        Token id = probe.next();
        if (probe.accept_punct(":") && probe.at_end() && !is_opcode_word(id.text)) {
          if (f.find_block(id.text)) l.fail("duplicate label '" + id.text + "'");
          if (cur && !terminated)
            l.fail("block '" + cur->label + "' lacks a terminator");
          f.blocks.emplace_back();
          cur = &f.blocks.back();
          cur->label = id.text;
          seen_label = true;
          terminated = false;
          continue;
        }
      }
      if (!cur) l.fail("instruction before first block label");
      if (terminated) l.fail("instruction after terminator in block '" + cur->label + "'");
      terminated = parse_inst_or_term(l, *cur);
    }
  }

  static bool is_opcode_word(const std::string& w) {
    static const char* words[] = {
        "const", "add", "sub", "mul", "sdiv", "srem", "icmp", "fadd", "fsub",
        "fmul", "fdiv", "fcmp", "zext", "trunc", "sitofp", "fptosi",
        "slot_addr", "load", "store", "call", "icall", "addr_of", "print",
        "setjmp", "longjmp", "may_throw", "br", "condbr", "switch", "ret"};
    for (const char* s : words)
      if (w == s) return true;
    return false;
  }

  // Returns true when the parsed line was a terminator.
  bool parse_inst_or_term(LineLexer& l, BasicBlock& b) {
    std::string result;
    if (l.peek().kind == Token::Kind::Reg) {
      result = l.next().text;
      l.expect_punct("=");
    }
    Token op = l.expect(Token::Kind::Ident, "opcode");
    const std::string& w = op.text;

    if (w == "br" || w == "condbr" || w == "switch" || w == "ret") {
      if (!result.empty()) l.fail("terminators produce no value");
      parse_term(l, w, b.term);
      end_of(l);
      return true;
    }

    Instruction in;
    in.result = result;
    if (w == "const") {
      in.op = Opcode::Const;
      in.type = parse_type(l);
      in.imm = parse_operand(l);
      if (is_float(in.type)) in.imm = coerce_float(l, in.imm);
      if (is_int(in.type)) in.imm.ival = normalize_int(in.imm.ival, in.type);
    } else if (w == "add" || w == "sub" || w == "mul" || w == "sdiv" ||
               w == "srem" || w == "fadd" || w == "fsub" || w == "fmul" ||
               w == "fdiv") {
      in.op = w == "add" ? Opcode::Add
              : w == "sub" ? Opcode::Sub
              : w == "mul" ? Opcode::Mul
              : w == "sdiv" ? Opcode::Sdiv
              : w == "srem" ? Opcode::Srem
              : w == "fadd" ? Opcode::Fadd
              : w == "fsub" ? Opcode::Fsub
              : w == "fmul" ? Opcode::Fmul
                            : Opcode::Fdiv;
      in.type = parse_type(l);
      in.args.push_back(parse_operand(l));
      l.expect_punct(",");
      in.args.push_back(parse_operand(l));
      if (is_float(in.type))
        for (auto& a : in.args) a = coerce_float(l, a);
      if (is_int(in.type))
        for (auto& a : in.args)
          if (a.kind == Operand::Kind::ImmInt) a.ival = normalize_int(a.ival, in.type);
    } else if (w == "icmp" || w == "fcmp") {
      in.op = w == "icmp" ? Opcode::Icmp : Opcode::Fcmp;
      in.pred = l.expect(Token::Kind::Ident, "predicate").text;
      in.type = parse_type(l);
      in.args.push_back(parse_operand(l));
      l.expect_punct(",");
      in.args.push_back(parse_operand(l));
      if (is_float(in.type))
        for (auto& a : in.args) a = coerce_float(l, a);
      if (is_int(in.type))
        for (auto& a : in.args)
          if (a.kind == Operand::Kind::ImmInt) a.ival = normalize_int(a.ival, in.type);
    } else if (w == "zext" || w == "trunc" || w == "sitofp" || w == "fptosi") {
      in.op = w == "zext" ? Opcode::Zext
              : w == "trunc" ? Opcode::Trunc
              : w == "sitofp" ? Opcode::Sitofp
                              : Opcode::Fptosi;
      in.type = parse_type(l);
      in.args.push_back(parse_operand(l));
      if (is_float(in.type)) in.args[0] = coerce_float(l, in.args[0]);
      if (!l.accept_ident("to")) l.fail("expected 'to'");
      in.to_type = parse_type(l);
    } else if (w == "slot_addr") {
      in.op = Opcode::SlotAddr;
      in.slot = l.expect(Token::Kind::Reg, "%slot").text;
    } else if (w == "load") {
      in.op = Opcode::Load;
      in.type = parse_type(l);
      l.expect_punct(",");
      in.args.push_back(parse_operand(l));
    } else if (w == "store") {
      in.op = Opcode::Store;
      in.type = parse_type(l);
      in.args.push_back(parse_operand(l));
      l.expect_punct(",");
      in.args.push_back(parse_operand(l));
      if (is_float(in.type)) in.args[0] = coerce_float(l, in.args[0]);
      if (is_int(in.type) && in.args[0].kind == Operand::Kind::ImmInt)
        in.args[0].ival = normalize_int(in.args[0].ival, in.type);
    } else if (w == "call") {
      in.op = Opcode::Call;
      in.callee = l.expect(Token::Kind::At, "@callee").text;
      parse_call_args(l, in.args);
    } else if (w == "icall") {
      in.op = Opcode::Icall;
      in.args.push_back(parse_operand(l));
      parse_call_args(l, in.args);
      l.expect_punct("->");
      in.type = parse_type(l);
      if (l.accept_ident("tagcheck")) in.tag_checked = true;
    } else if (w == "addr_of") {
      in.op = Opcode::AddrOfFunc;
      in.callee = l.expect(Token::Kind::At, "@target").text;
      if (l.accept_ident("tag")) {
        Token t = l.expect(Token::Kind::Int, "0 or 1");
        if (t.ival != 0 && t.ival != 1) l.fail("tag must be 0 or 1");
        in.tag_ctrl = static_cast<int>(t.ival);
      }
    } else if (w == "print") {
      in.op = Opcode::Print;
      in.type = parse_type(l);
      in.args.push_back(parse_operand(l));
      if (is_float(in.type)) in.args[0] = coerce_float(l, in.args[0]);
    } else if (w == "setjmp") {
      in.op = Opcode::Setjmp;
      in.args.push_back(parse_operand(l));
    } else if (w == "longjmp") {
      in.op = Opcode::Longjmp;
      in.args.push_back(parse_operand(l));
      l.expect_punct(",");
      in.args.push_back(parse_operand(l));
    } else if (w == "may_throw") {
      in.op = Opcode::MayThrow;
      in.args.push_back(parse_operand(l));
      l.expect_punct(",");
      in.handler = l.expect(Token::Kind::Ident, "handler label").text;
    } else {
      l.fail("unknown opcode '" + w + "'");
    }
    end_of(l);
    b.insts.push_back(std::move(in));
    return false;
  }

  void parse_call_args(LineLexer& l, std::vector<Operand>& args) {
    l.expect_punct("(");
    if (l.accept_punct(")")) return;
    do {
      args.push_back(parse_operand(l));
    } while (l.accept_punct(","));
    l.expect_punct(")");
  }

  void parse_term(LineLexer& l, const std::string& w, Terminator& t) {
    if (w == "br") {
      t.kind = TermKind::Br;
      t.targets.push_back(l.expect(Token::Kind::Ident, "target label").text);
    } else if (w == "condbr") {
      t.kind = TermKind::CondBr;
      t.value = parse_operand(l);
      l.expect_punct(",");
      t.targets.push_back(l.expect(Token::Kind::Ident, "label").text);
      l.expect_punct(",");
      t.targets.push_back(l.expect(Token::Kind::Ident, "label").text);
    } else if (w == "switch") {
      t.kind = TermKind::Switch;
      t.type = parse_type(l);
      t.value = parse_operand(l);
      for (;;) {
        l.expect_punct(",");
        if (l.accept_ident("default")) {
          t.default_target = l.expect(Token::Kind::Ident, "label").text;
          break;
        }
        l.expect_punct("[");
        SwitchCase c;
        c.value = l.expect(Token::Kind::Int, "case value").ival;
        l.expect_punct("->");
        c.target = l.expect(Token::Kind::Ident, "label").text;
        l.expect_punct("]");
        t.cases.push_back(std::move(c));
      }
    } else {  // ret
      t.kind = TermKind::Ret;
      if (!l.at_end()) {
        t.has_value = true;
        t.type = parse_type(l);
        t.value = parse_operand(l);
        if (is_float(t.type)) t.value = coerce_float(l, t.value);
        if (is_int(t.type) && t.value.kind == Operand::Kind::ImmInt)
          t.value.ival = normalize_int(t.value.ival, t.type);
      }
    }
  }

  void add_function(LineLexer& l, Function f) {
    if (mod_.find_function(f.name)) l.fail("duplicate function @" + f.name);
    mod_.functions.push_back(std::move(f));
  }

  // Cache direct-call return types; unresolved callees are a parse error so
  // every later stage can rely on result_type().
  void resolve() {
    for (auto& f : mod_.functions) {
      for (auto& b : f.blocks) {
        for (auto& in : b.insts) {
          if (in.op != Opcode::Call) continue;
          const Function* callee = mod_.find_function(in.callee);
          if (!callee)
            throw ParseError(1, "call to unknown function @" + in.callee +
                                    " in @" + f.name);
          in.type = callee->ret_type;
        }
      }
    }
  }
};

}  // namespace

IrModule parse_module(const std::string& text) { return Parser(text).run(); }

}  // namespace irobf
