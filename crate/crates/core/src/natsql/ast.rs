use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A `table.column` reference. Both parts are stored lowercase; the star
/// form `table.*` stands for a whole row of `table`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl AsRef<str>, column: impl AsRef<str>) -> Self {
        ColumnRef {
            table: table.as_ref().to_ascii_lowercase(),
            column: column.as_ref().to_ascii_lowercase(),
        }
    }

    pub fn star(table: impl AsRef<str>) -> Self {
        ColumnRef::new(table, "*")
    }

    pub fn is_star(&self) -> bool {
        self.column == "*"
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid column reference `{0}`: expected table.column")]
pub struct ColumnRefParseError(pub String);

impl FromStr for ColumnRef {
    type Err = ColumnRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() && !c.contains('.') => {
                Ok(ColumnRef::new(t, c))
            }
            _ => Err(ColumnRefParseError(s.to_string())),
        }
    }
}

impl Serialize for ColumnRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    None,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Agg {
    pub const ALL: [Agg; 6] = [Agg::None, Agg::Count, Agg::Sum, Agg::Avg, Agg::Min, Agg::Max];

    pub fn keyword(self) -> &'static str {
        match self {
            Agg::None => "",
            Agg::Count => "count",
            Agg::Sum => "sum",
            Agg::Avg => "avg",
            Agg::Min => "min",
            Agg::Max => "max",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Agg> {
        match word.to_ascii_lowercase().as_str() {
            "count" => Some(Agg::Count),
            "sum" => Some(Agg::Sum),
            "avg" => Some(Agg::Avg),
            "min" => Some(Agg::Min),
            "max" => Some(Agg::Max),
            _ => None,
        }
    }
}

/// A possibly aggregated, possibly distinct column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelectItem {
    pub agg: Agg,
    pub column: ColumnRef,
    pub distinct: bool,
}

impl SelectItem {
    pub fn column(column: ColumnRef) -> Self {
        SelectItem { agg: Agg::None, column, distinct: false }
    }

    pub fn aggregate(agg: Agg, column: ColumnRef) -> Self {
        SelectItem { agg, column, distinct: false }
    }

    pub fn is_aggregate(&self) -> bool {
        self.agg != Agg::None
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let distinct = if self.distinct { "distinct " } else { "" };
        match self.agg {
            Agg::None => write!(f, "{distinct}{}", self.column),
            agg => write!(f, "{}({distinct}{})", agg.keyword(), self.column),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Text,
    Number,
}

/// A condition value kept verbatim; only the kind tag is interpreted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub text: String,
    pub kind: LiteralKind,
}

impl Literal {
    pub fn text(s: impl Into<String>) -> Self {
        Literal { text: s.into(), kind: LiteralKind::Text }
    }

    pub fn number(s: impl Into<String>) -> Self {
        Literal { text: s.into(), kind: LiteralKind::Number }
    }

    /// Case-insensitive comparison key.
    pub fn folded(&self) -> (LiteralKind, String) {
        (self.kind, self.text.to_lowercase())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LiteralKind::Number => f.write_str(&self.text),
            LiteralKind::Text => write!(f, "'{}'", self.text.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "like")]
    Like,
    #[serde(rename = "not like")]
    NotLike,
    #[serde(rename = "in")]
    In,
    #[serde(rename = "not in")]
    NotIn,
    #[serde(rename = "between")]
    Between,
}

impl Op {
    pub const ALL: [Op; 11] = [
        Op::Eq,
        Op::Ne,
        Op::Gt,
        Op::Lt,
        Op::Ge,
        Op::Le,
        Op::Like,
        Op::NotLike,
        Op::In,
        Op::NotIn,
        Op::Between,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Gt => ">",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Le => "<=",
            Op::Like => "like",
            Op::NotLike => "not like",
            Op::In => "in",
            Op::NotIn => "not in",
            Op::Between => "between",
        }
    }

    pub fn is_negative(self) -> bool {
        matches!(self, Op::Ne | Op::NotLike | Op::NotIn)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conj {
    And,
    Or,
}

impl Conj {
    pub fn keyword(self) -> &'static str {
        match self {
            Conj::And => "and",
            Conj::Or => "or",
        }
    }
}

impl fmt::Display for Conj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Right-hand side of a condition. An [`Rhs::Item`] compiles to a nested
/// `SELECT`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rhs {
    Literal(Literal),
    Item(SelectItem),
    Range(Literal, Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub left: SelectItem,
    pub op: Op,
    pub right: Rhs,
    pub conj_to_next: Option<Conj>,
}

impl Condition {
    pub fn new(left: SelectItem, op: Op, right: Rhs) -> Self {
        Condition { left, op, right, conj_to_next: None }
    }

    pub fn is_subquery(&self) -> bool {
        matches!(self.right, Rhs::Item(_))
    }

    /// Aggregate on the left side: compiles to `HAVING`.
    pub fn is_having(&self) -> bool {
        self.left.is_aggregate()
    }

    /// Columns mentioned on either side.
    pub fn columns(&self) -> impl Iterator<Item = &ColumnRef> {
        let right = match &self.right {
            Rhs::Item(item) => Some(&item.column),
            _ => None,
        };
        std::iter::once(&self.left.column).chain(right)
    }
}

/// Writes the condition without its trailing conjunction.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.left, self.op)?;
        match &self.right {
            Rhs::Literal(lit) => write!(f, "{lit}"),
            Rhs::Item(item) => write!(f, "{item}"),
            Rhs::Range(lo, hi) => write!(f, "{lo} and {hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Asc => "ASC",
            Direction::Desc => "DESC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderClause {
    pub items: Vec<SelectItem>,
    pub direction: Direction,
    pub limit: Option<u64>,
}

impl fmt::Display for OrderClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ORDER BY ")?;
        write_list(f, &self.items)?;
        write!(f, " {}", self.direction)?;
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// Conditions of one `WHERE` annotation. `joiner` says how the first
/// condition attaches to conditions collected from earlier units; `None`
/// means the default `and`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WhereClause {
    pub joiner: Option<Conj>,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClauseKind {
    #[serde(rename = "SELECT")]
    Select,
    #[serde(rename = "WHERE")]
    Where,
    #[serde(rename = "GROUP_BY")]
    GroupBy,
    #[serde(rename = "ORDER_BY")]
    OrderBy,
    #[serde(rename = "EXTRA")]
    Extra,
    #[serde(rename = "NONE")]
    None,
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseKind::Select => "SELECT",
            ClauseKind::Where => "WHERE",
            ClauseKind::GroupBy => "GROUP_BY",
            ClauseKind::OrderBy => "ORDER_BY",
            ClauseKind::Extra => "EXTRA",
            ClauseKind::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NatSqlClause {
    Select(Vec<SelectItem>),
    Where(WhereClause),
    GroupBy(Vec<ColumnRef>),
    OrderBy(OrderClause),
    Extra(ColumnRef),
}

impl NatSqlClause {
    pub fn kind(&self) -> ClauseKind {
        match self {
            NatSqlClause::Select(_) => ClauseKind::Select,
            NatSqlClause::Where(_) => ClauseKind::Where,
            NatSqlClause::GroupBy(_) => ClauseKind::GroupBy,
            NatSqlClause::OrderBy(_) => ClauseKind::OrderBy,
            NatSqlClause::Extra(_) => ClauseKind::Extra,
        }
    }

    pub fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            NatSqlClause::Select(items) => items.iter().map(|i| &i.column).collect(),
            NatSqlClause::Where(w) => w.conditions.iter().flat_map(|c| c.columns()).collect(),
            NatSqlClause::GroupBy(cols) => cols.iter().collect(),
            NatSqlClause::OrderBy(o) => o.items.iter().map(|i| &i.column).collect(),
            NatSqlClause::Extra(col) => vec![col],
        }
    }
}

impl fmt::Display for NatSqlClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatSqlClause::Select(items) => {
                f.write_str("SELECT ")?;
                write_list(f, items)
            }
            NatSqlClause::Where(w) => {
                f.write_str("WHERE ")?;
                if let Some(j) = w.joiner {
                    write!(f, "{j} ")?;
                }
                write_conditions(f, &w.conditions)
            }
            NatSqlClause::GroupBy(cols) => {
                f.write_str("GROUP BY ")?;
                write_list(f, cols)
            }
            NatSqlClause::OrderBy(o) => write!(f, "{o}"),
            NatSqlClause::Extra(col) => write!(f, "extra {col}"),
        }
    }
}

/// A whole NatSQL query, produced by clause combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NatSqlQuery {
    pub select: Vec<SelectItem>,
    pub conditions: Vec<Condition>,
    pub group_by: Vec<ColumnRef>,
    pub order_by: Option<OrderClause>,
    /// Columns from `extra` annotations not yet given a position.
    pub extras: Vec<ColumnRef>,
}

impl NatSqlQuery {
    pub fn subquery_count(&self) -> usize {
        self.conditions.iter().filter(|c| c.is_subquery()).count()
    }

    pub fn having_count(&self) -> usize {
        self.conditions.iter().filter(|c| c.is_having()).count()
    }

    /// Every column mentioned anywhere in the query.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out: Vec<&ColumnRef> = self.select.iter().map(|i| &i.column).collect();
        out.extend(self.conditions.iter().flat_map(|c| c.columns()));
        out.extend(self.group_by.iter());
        if let Some(o) = &self.order_by {
            out.extend(o.items.iter().map(|i| &i.column));
        }
        out.extend(self.extras.iter());
        out
    }
}

impl fmt::Display for NatSqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        write_list(f, &self.select)?;
        if !self.conditions.is_empty() {
            f.write_str(" WHERE ")?;
            write_conditions(f, &self.conditions)?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            write_list(f, &self.group_by)?;
        }
        if let Some(o) = &self.order_by {
            write!(f, " {o}")?;
        }
        for col in &self.extras {
            write!(f, " extra {col}")?;
        }
        Ok(())
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn write_conditions(f: &mut fmt::Formatter<'_>, conds: &[Condition]) -> fmt::Result {
    for (i, cond) in conds.iter().enumerate() {
        write!(f, "{cond}")?;
        if i + 1 < conds.len() {
            write!(f, " {} ", cond.conj_to_next.unwrap_or(Conj::And))?;
        }
    }
    Ok(())
}
