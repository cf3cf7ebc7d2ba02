//! Recursive-descent parser for the read-only query grammar:
//!
//! ```text
//! query    := SELECT item {, item} FROM table {, table} [WHERE or]
//!             [GROUP BY expr {, expr}] [ORDER BY key [ASC|DESC] {, ...}] [LIMIT n]
//! item     := COUNT ( * | [DISTINCT] col ) [[AS] ident] | expr [[AS] ident]
//! expr     := AGE_YEARS ( col , value ) | BUCKET ( expr , n {, n} ) | col
//! table    := ident [[AS] ident]
//! or       := and {OR and}
//! and      := atom {AND atom}
//! atom     := ( or ) | col op operand | col BETWEEN value AND value
//! operand  := value | col
//! value    := 'string' | n | TRUE | FALSE | :param
//! col      := ident [. ident]
//! ```

use super::ast::*;
use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::ParseError;
use crate::relstore::Value;

pub(crate) fn parse_syntax(text: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let q = p.query()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::Syntax {
            offset: t.offset,
            expected: vec!["end of query".into()],
            found: t.text.clone(),
        });
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Token> {
        self.tokens.get(self.pos + ahead)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let (offset, found) = match self.peek() {
            Some(t) => (t.offset, t.text.clone()),
            None => (self.end, "end of query".to_string()),
        };
        Err(ParseError::Syntax {
            offset,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        })
    }

    fn eat_kw(&mut self, kw: Keyword) -> bool {
        if self.peek().is_some_and(|t| t.is_keyword(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(&[kw.as_str()])
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_symbol(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.fail(&[sym])
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(self.advance().unwrap().text),
            _ => self.fail(&["identifier"]),
        }
    }

    fn number(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Number => {
                Ok(self.advance().unwrap().text.parse().expect("lexer checked range"))
            }
            _ => self.fail(&["number"]),
        }
    }

    fn query(&mut self) -> Result<QueryAst, ParseError> {
        self.expect_kw(Keyword::Select)?;
        let mut select = vec![self.select_item()?];
        while self.eat_sym(",") {
            select.push(self.select_item()?);
        }

        self.expect_kw(Keyword::From)?;
        let mut from = vec![self.table_ref()?];
        while self.eat_sym(",") {
            from.push(self.table_ref()?);
        }

        let where_clause = if self.eat_kw(Keyword::Where) {
            Some(self.or_expr()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.eat_kw(Keyword::Group) {
            self.expect_kw(Keyword::By)?;
            group_by.push(self.expr()?);
            while self.eat_sym(",") {
                group_by.push(self.expr()?);
            }
        }

        let mut order_by = Vec::new();
        if self.eat_kw(Keyword::Order) {
            self.expect_kw(Keyword::By)?;
            order_by.push(self.order_item()?);
            while self.eat_sym(",") {
                order_by.push(self.order_item()?);
            }
        }

        let limit = if self.eat_kw(Keyword::Limit) {
            let offset = self.peek().map_or(self.end, |t| t.offset);
            let n = self.number()?;
            if n <= 0 {
                return Err(ParseError::Syntax {
                    offset,
                    expected: vec!["positive integer".into()],
                    found: n.to_string(),
                });
            }
            Some(n as u64)
        } else {
            None
        };

        Ok(QueryAst {
            select,
            from,
            where_clause,
            group_by,
            order_by,
            limit,
            params: Vec::new(),
        })
    }

    fn alias(&mut self) -> Result<Option<String>, ParseError> {
        if self.eat_kw(Keyword::As) {
            return self.ident().map(Some);
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(Some(self.advance().unwrap().text)),
            _ => Ok(None),
        }
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        let expr = if self.eat_kw(Keyword::Count) {
            self.expect_sym("(")?;
            let agg = if self.eat_sym("*") {
                Aggregate::CountStar
            } else if self.eat_kw(Keyword::Distinct) {
                Aggregate::CountDistinct(self.column()?)
            } else if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
                Aggregate::Count(self.column()?)
            } else {
                return self.fail(&["*", "DISTINCT", "column"]);
            };
            self.expect_sym(")")?;
            SelectExpr::Aggregate(agg)
        } else if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            SelectExpr::Expr(self.expr()?)
        } else {
            return self.fail(&["COUNT", "AGE_YEARS", "BUCKET", "column"]);
        };
        let alias = self.alias()?;
        Ok(SelectItem { expr, alias })
    }

    fn table_ref(&mut self) -> Result<FromTable, ParseError> {
        let table = self.ident()?;
        let alias = self.alias()?;
        Ok(FromTable { table, alias })
    }

    fn column(&mut self) -> Result<ColumnRef, ParseError> {
        let first = self.ident()?;
        if self.eat_sym(".") {
            let name = self.ident()?;
            Ok(ColumnRef::unresolved(Some(first), name))
        } else {
            Ok(ColumnRef::unresolved(None, first))
        }
    }

    fn is_call(&self, name: &str) -> bool {
        self.peek()
            .is_some_and(|t| t.kind == TokenKind::Identifier && t.text.eq_ignore_ascii_case(name))
            && self.peek_at(1).is_some_and(|t| t.is_symbol("("))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.is_call("AGE_YEARS") {
            self.pos += 2;
            let dob = self.column()?;
            self.expect_sym(",")?;
            let reference = self.value()?;
            self.expect_sym(")")?;
            Ok(Expr::AgeYears { dob, reference })
        } else if self.is_call("BUCKET") {
            self.pos += 2;
            let input = Box::new(self.expr()?);
            let mut bounds = Vec::new();
            self.expect_sym(",")?;
            bounds.push(self.number()?);
            while self.eat_sym(",") {
                bounds.push(self.number()?);
            }
            self.expect_sym(")")?;
            Ok(Expr::Bucket { input, bounds })
        } else if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            Ok(Expr::Column(self.column()?))
        } else {
            self.fail(&["AGE_YEARS", "BUCKET", "column"])
        }
    }

    fn order_item(&mut self) -> Result<OrderItem, ParseError> {
        let key = OrderKey::Column(self.column()?);
        let descending = if self.eat_kw(Keyword::Desc) {
            true
        } else {
            self.eat_kw(Keyword::Asc);
            false
        };
        Ok(OrderItem {
            key,
            descending,
            output: UNRESOLVED,
        })
    }

    fn or_expr(&mut self) -> Result<BoolExpr, ParseError> {
        let mut left = self.and_expr()?;
        while self.eat_kw(Keyword::Or) {
            let right = self.and_expr()?;
            left = BoolExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<BoolExpr, ParseError> {
        let mut left = self.atom()?;
        while self.eat_kw(Keyword::And) {
            let right = self.atom()?;
            left = BoolExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<BoolExpr, ParseError> {
        if self.eat_sym("(") {
            let inner = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(BoolExpr::Paren(Box::new(inner)));
        }
        if !self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            return self.fail(&["(", "column"]);
        }
        let lhs = self.column()?;
        if self.eat_kw(Keyword::Between) {
            let low = self.value()?;
            self.expect_kw(Keyword::And)?;
            let high = self.value()?;
            return Ok(BoolExpr::Between {
                column: lhs,
                low,
                high,
            });
        }
        let op = match self.peek() {
            Some(t) if t.kind == TokenKind::Symbol => match t.text.as_str() {
                "=" => CompareOp::Eq,
                "<>" => CompareOp::Ne,
                "<" => CompareOp::Lt,
                "<=" => CompareOp::Le,
                ">" => CompareOp::Gt,
                ">=" => CompareOp::Ge,
                _ => return self.fail(&["comparison operator", "BETWEEN"]),
            },
            _ => return self.fail(&["comparison operator", "BETWEEN"]),
        };
        self.pos += 1;
        let rhs = if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
            Operand::Column(self.column()?)
        } else {
            self.value()?
        };
        Ok(BoolExpr::Compare { lhs, op, rhs })
    }

    fn value(&mut self) -> Result<Operand, ParseError> {
        let Some(t) = self.peek() else {
            return self.fail(&["literal", "parameter"]);
        };
        let operand = match t.kind {
            TokenKind::StringLiteral => Operand::Literal(Value::Str(t.string_value().unwrap())),
            TokenKind::Number => Operand::Literal(Value::Int(t.text.parse().expect("lexer range"))),
            TokenKind::Keyword(Keyword::True) => Operand::Literal(Value::Bool(true)),
            TokenKind::Keyword(Keyword::False) => Operand::Literal(Value::Bool(false)),
            TokenKind::Parameter => Operand::Param(t.param_name().unwrap().to_string()),
            _ => return self.fail(&["literal", "parameter"]),
        };
        self.pos += 1;
        Ok(operand)
    }
}
