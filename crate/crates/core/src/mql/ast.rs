use crate::relstore::{DataType, Value};

/// A resolved reference to one column of one FROM entry.
///
/// `qualifier` is kept as written so rendering reproduces it; `name` carries the
/// schema's spelling. `source` and `column` index the FROM list and that table's
/// columns and are filled in by resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
    pub source: usize,
    pub column: usize,
}

pub(crate) const UNRESOLVED: usize = usize::MAX;

impl ColumnRef {
    pub(crate) fn unresolved(qualifier: Option<String>, name: String) -> ColumnRef {
        ColumnRef {
            qualifier,
            name,
            source: UNRESOLVED,
            column: UNRESOLVED,
        }
    }

    /// Same underlying column, regardless of how it was spelled.
    pub fn same_column(&self, other: &ColumnRef) -> bool {
        self.source == other.source && self.column == other.column
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromTable {
    pub table: String,
    pub alias: Option<String>,
}

impl FromTable {
    /// The name column qualifiers must use for this entry.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

/// Right-hand sides and bounds: a literal, a `:name` placeholder, or another column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Literal(Value),
    Param(String),
    Column(ColumnRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Compare {
        lhs: ColumnRef,
        op: CompareOp,
        rhs: Operand,
    },
    Between {
        column: ColumnRef,
        low: Operand,
        high: Operand,
    },
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Paren(Box<BoolExpr>),
}

impl BoolExpr {
    /// Top-level conjuncts, looking through parentheses.
    pub fn conjuncts(&self) -> Vec<&BoolExpr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a BoolExpr, out: &mut Vec<&'a BoolExpr>) {
            match e {
                BoolExpr::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                BoolExpr::Paren(inner) => walk(inner, out),
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.visit_columns(&mut |c| out.push(c));
        out
    }

    pub fn visit_columns<'a>(&'a self, f: &mut impl FnMut(&'a ColumnRef)) {
        match self {
            BoolExpr::Compare { lhs, rhs, .. } => {
                f(lhs);
                if let Operand::Column(c) = rhs {
                    f(c);
                }
            }
            BoolExpr::Between { column, low, high } => {
                f(column);
                for o in [low, high] {
                    if let Operand::Column(c) = o {
                        f(c);
                    }
                }
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.visit_columns(f);
                b.visit_columns(f);
            }
            BoolExpr::Paren(inner) => inner.visit_columns(f),
        }
    }
}

/// Non-aggregate value expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Column(ColumnRef),
    /// Whole years from the date of birth to the reference date.
    AgeYears {
        dob: ColumnRef,
        reference: Operand,
    },
    /// Bracket label for an integer input; `bounds` strictly increasing.
    Bucket {
        input: Box<Expr>,
        bounds: Vec<i64>,
    },
}

impl Expr {
    /// Structural equality that ignores how column references were spelled.
    pub fn same_as(&self, other: &Expr) -> bool {
        match (self, other) {
            (Expr::Column(a), Expr::Column(b)) => a.same_column(b),
            (
                Expr::AgeYears {
                    dob: a,
                    reference: ra,
                },
                Expr::AgeYears {
                    dob: b,
                    reference: rb,
                },
            ) => {
                a.same_column(b)
                    && match (ra, rb) {
                        (Operand::Column(x), Operand::Column(y)) => x.same_column(y),
                        (x, y) => x == y,
                    }
            }
            (Expr::Bucket { input: a, bounds: ba }, Expr::Bucket { input: b, bounds: bb }) => {
                ba == bb && a.same_as(b)
            }
            _ => false,
        }
    }

    pub fn visit_columns<'a>(&'a self, f: &mut impl FnMut(&'a ColumnRef)) {
        match self {
            Expr::Column(c) => f(c),
            Expr::AgeYears { dob, reference } => {
                f(dob);
                if let Operand::Column(c) = reference {
                    f(c);
                }
            }
            Expr::Bucket { input, .. } => input.visit_columns(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Aggregate {
    CountStar,
    Count(ColumnRef),
    CountDistinct(ColumnRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectExpr {
    Expr(Expr),
    Aggregate(Aggregate),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub expr: SelectExpr,
    pub alias: Option<String>,
}

impl SelectItem {
    pub fn is_aggregate(&self) -> bool {
        matches!(self.expr, SelectExpr::Aggregate(_))
    }

    /// Output column label: the alias, else the canonical expression text.
    pub fn label(&self) -> String {
        match &self.alias {
            Some(a) => a.clone(),
            None => super::render::select_expr(&self.expr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderKey {
    Alias(String),
    Column(ColumnRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub key: OrderKey,
    pub descending: bool,
    /// Index of the select item this key sorts by.
    pub output: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryAst {
    pub select: Vec<SelectItem>,
    pub from: Vec<FromTable>,
    pub where_clause: Option<BoolExpr>,
    pub group_by: Vec<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    /// Placeholders in first-appearance order, typed by their position.
    pub params: Vec<ParamSlot>,
}

/// A placeholder and the type its position demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlot {
    pub name: String,
    pub dtype: DataType,
}

impl QueryAst {
    pub fn has_aggregate(&self) -> bool {
        self.select.iter().any(SelectItem::is_aggregate)
    }

    /// Every operand in tree order (select, where, group by).
    pub fn operands(&self) -> Vec<&Operand> {
        let mut out = Vec::new();
        for item in &self.select {
            if let SelectExpr::Expr(e) = &item.expr {
                expr_operands(e, &mut out);
            }
        }
        if let Some(w) = &self.where_clause {
            bool_operands(w, &mut out);
        }
        for g in &self.group_by {
            expr_operands(g, &mut out);
        }
        out
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Every column reference in the query, in clause order.
    pub fn all_columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        for item in &self.select {
            match &item.expr {
                SelectExpr::Expr(e) => e.visit_columns(&mut |c| out.push(c)),
                SelectExpr::Aggregate(Aggregate::Count(c) | Aggregate::CountDistinct(c)) => out.push(c),
                SelectExpr::Aggregate(Aggregate::CountStar) => {}
            }
        }
        if let Some(w) = &self.where_clause {
            w.visit_columns(&mut |c| out.push(c));
        }
        for g in &self.group_by {
            g.visit_columns(&mut |c| out.push(c));
        }
        for o in &self.order_by {
            if let OrderKey::Column(c) = &o.key {
                out.push(c);
            }
        }
        out
    }
}

fn expr_operands<'a>(e: &'a Expr, out: &mut Vec<&'a Operand>) {
    match e {
        Expr::Column(_) => {}
        Expr::AgeYears { reference, .. } => out.push(reference),
        Expr::Bucket { input, .. } => expr_operands(input, out),
    }
}

fn bool_operands<'a>(e: &'a BoolExpr, out: &mut Vec<&'a Operand>) {
    match e {
        BoolExpr::Compare { rhs, .. } => out.push(rhs),
        BoolExpr::Between { low, high, .. } => {
            out.push(low);
            out.push(high);
        }
        BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
            bool_operands(a, out);
            bool_operands(b, out);
        }
        BoolExpr::Paren(inner) => bool_operands(inner, out),
    }
}
