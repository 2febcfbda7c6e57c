//! Recursive-descent parser for nested call syntax, followed by a typing pass.

use crate::error::ProgramError;
use crate::scene::{AttrKind, AttrValue, Color, Material, ObjectAttrs, Relation, Shape, Size};

use super::{Action, IntCmp, IntExpr, ObjExpr, Placement, Program, Question, SetExpr};

/// Untyped parse tree.
#[derive(Debug)]
enum Node<'a> {
    Word { text: &'a str },
    Call { name: &'a str, args: Vec<Node<'a>> },
}

impl Node<'_> {
    fn render(&self) -> String {
        match self {
            Node::Word { text, .. } => text.to_string(),
            Node::Call { name, args, .. } => {
                let args: Vec<String> = args.iter().map(Node::render).collect();
                format!("{name}({})", args.join(","))
            }
        }
    }

    fn type_error(&self, message: impl Into<String>) -> ProgramError {
        ProgramError::Type { node: self.render(), message: message.into() }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-' | b'+')
}

impl<'a> Parser<'a> {
    fn syntax(&self, offset: usize, message: impl Into<String>) -> ProgramError {
        ProgramError::Syntax { offset, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.as_bytes().get(self.pos).copied()
    }

    fn node(&mut self) -> Result<Node<'a>, ProgramError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && is_word_byte(self.src.as_bytes()[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.src.as_bytes().get(start) {
                Some(b) => self.syntax(start, format!("unexpected `{}`", *b as char)),
                None => self.syntax(start, "unexpected end of input"),
            });
        }
        let text = &self.src[start..self.pos];
        if self.peek() != Some(b'(') {
            return Ok(Node::Word { text });
        }
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(Node::Call { name: text, args });
        }
        loop {
            args.push(self.node()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(Node::Call { name: text, args });
                }
                Some(b) => return Err(self.syntax(self.pos, format!("expected `,` or `)`, found `{}`", b as char))),
                None => return Err(self.syntax(self.pos, "unclosed `(`")),
            }
        }
    }
}

fn parse_tree(text: &str) -> Result<Node<'_>, ProgramError> {
    if let Some(offset) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ProgramError::Syntax { offset, message: "non-ASCII input".into() });
    }
    let mut parser = Parser { src: text, pos: 0 };
    let node = parser.node()?;
    if let Some(b) = parser.peek() {
        return Err(parser.syntax(parser.pos, format!("trailing input starting with `{}`", b as char)));
    }
    Ok(node)
}

/// Splits `filter_color`-style names into their attribute kind.
fn kind_suffix<'a>(name: &'a str, prefix: &str) -> Option<AttrKind> {
    name.strip_prefix(prefix).and_then(AttrKind::from_name)
}

fn arity<'n, 'a>(node: &'n Node<'a>, args: &'n [Node<'a>], n: usize) -> Result<&'n [Node<'a>], ProgramError> {
    if args.len() == n {
        Ok(args)
    } else {
        Err(node.type_error(format!("expected {n} argument(s), found {}", args.len())))
    }
}

fn word<'n>(node: &'n Node<'_>, what: &str) -> Result<&'n str, ProgramError> {
    match node {
        Node::Word { text, .. } => Ok(text),
        Node::Call { .. } => Err(node.type_error(format!("expected {what} literal"))),
    }
}

fn attr_value(node: &Node<'_>, kind: AttrKind) -> Result<AttrValue, ProgramError> {
    let text = word(node, kind.name())?;
    AttrValue::parse(kind, text).ok_or_else(|| node.type_error(format!("`{text}` is not a {}", kind.name())))
}

fn number(node: &Node<'_>) -> Result<f64, ProgramError> {
    let text = word(node, "number")?;
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| node.type_error(format!("`{text}` is not a finite number")))
}

fn set_expr(node: &Node<'_>) -> Result<SetExpr, ProgramError> {
    let Node::Call { name, args, .. } = node else {
        return Err(node.type_error("expected a set-valued expression, found a literal"));
    };
    if let Some(kind) = kind_suffix(name, "filter_") {
        let args = arity(node, args, 2)?;
        return Ok(SetExpr::Filter(Box::new(set_expr(&args[0])?), attr_value(&args[1], kind)?));
    }
    match *name {
        "scene" => {
            arity(node, args, 0)?;
            Ok(SetExpr::Scene)
        }
        "relate" => {
            let args = arity(node, args, 2)?;
            let text = word(&args[1], "relation")?;
            let rel = Relation::from_name(text).ok_or_else(|| args[1].type_error(format!("`{text}` is not a relation")))?;
            Ok(SetExpr::Relate(Box::new(obj_expr(&args[0])?), rel))
        }
        "and" | "or" => {
            let args = arity(node, args, 2)?;
            let (a, b) = (Box::new(set_expr(&args[0])?), Box::new(set_expr(&args[1])?));
            Ok(if *name == "and" { SetExpr::And(a, b) } else { SetExpr::Or(a, b) })
        }
        "not" => {
            let args = arity(node, args, 1)?;
            Ok(SetExpr::Not(Box::new(set_expr(&args[0])?)))
        }
        _ => Err(node.type_error(format!("`{name}` is not a set-valued function"))),
    }
}

fn obj_expr(node: &Node<'_>) -> Result<ObjExpr, ProgramError> {
    match node {
        Node::Call { name: "unique", args, .. } => {
            let args = arity(node, args, 1)?;
            Ok(ObjExpr::Unique(Box::new(set_expr(&args[0])?)))
        }
        _ => Err(node.type_error("expected an object-valued expression (`unique(...)`)")),
    }
}

fn int_expr(node: &Node<'_>) -> Result<IntExpr, ProgramError> {
    match node {
        Node::Call { name: "count", args, .. } => {
            let args = arity(node, args, 1)?;
            Ok(IntExpr::Count(Box::new(set_expr(&args[0])?)))
        }
        _ => Err(node.type_error("expected an integer-valued expression (`count(...)`)")),
    }
}

fn int_cmp(name: &str) -> Option<IntCmp> {
    [IntCmp::Equal, IntCmp::Greater, IntCmp::Less].into_iter().find(|c| c.name() == name)
}

fn is_question_root(name: &str) -> bool {
    matches!(name, "count" | "exist")
        || kind_suffix(name, "query_").is_some()
        || kind_suffix(name, "equal_").is_some()
        || int_cmp(name).is_some()
}

fn is_action_root(name: &str) -> bool {
    matches!(name, "noop" | "add_object" | "remove" | "move" | "seq") || kind_suffix(name, "change_").is_some()
}

fn question(node: &Node<'_>) -> Result<Question, ProgramError> {
    let Node::Call { name, args, .. } = node else {
        return Err(node.type_error("a literal is not a question"));
    };
    if let Some(cmp) = int_cmp(name) {
        let args = arity(node, args, 2)?;
        return Ok(Question::CompareInt(cmp, int_expr(&args[0])?, int_expr(&args[1])?));
    }
    if let Some(kind) = kind_suffix(name, "query_") {
        let args = arity(node, args, 1)?;
        return Ok(Question::Query(kind, obj_expr(&args[0])?));
    }
    if let Some(kind) = kind_suffix(name, "equal_") {
        let args = arity(node, args, 2)?;
        return Ok(Question::EqualAttr(kind, obj_expr(&args[0])?, obj_expr(&args[1])?));
    }
    match *name {
        "count" => Ok(Question::Count(set_expr(&arity(node, args, 1)?[0])?)),
        "exist" => Ok(Question::Exist(set_expr(&arity(node, args, 1)?[0])?)),
        _ => Err(node.type_error(format!("`{name}(...)` is not a question root"))),
    }
}

fn placement(node: &Node<'_>) -> Result<Placement, ProgramError> {
    let Node::Call { name, args, .. } = node else {
        return Err(node.type_error("expected a placement"));
    };
    match *name {
        "ground" => {
            arity(node, args, 0)?;
            Ok(Placement::Ground)
        }
        "absolute" => {
            let args = arity(node, args, 2)?;
            Ok(Placement::Absolute { x: number(&args[0])?, y: number(&args[1])? })
        }
        "relative" => {
            let args = arity(node, args, 2)?;
            let text = word(&args[0], "relation")?;
            let rel = Relation::from_name(text)
                .filter(|r| *r != Relation::On)
                .ok_or_else(|| args[0].type_error(format!("`{text}` is not a ground relation (left/right/front/behind)")))?;
            Ok(Placement::Relative(rel, set_expr(&args[1])?))
        }
        "on" => Ok(Placement::On(set_expr(&arity(node, args, 1)?[0])?)),
        _ => Err(node.type_error(format!("`{name}` is not a placement"))),
    }
}

fn action(node: &Node<'_>, inside_seq: bool) -> Result<Action, ProgramError> {
    let Node::Call { name, args, .. } = node else {
        return Err(node.type_error("a literal is not an action"));
    };
    if let Some(kind) = kind_suffix(name, "change_") {
        let args = arity(node, args, 2)?;
        return Ok(Action::Change(set_expr(&args[0])?, attr_value(&args[1], kind)?));
    }
    match *name {
        "noop" => {
            arity(node, args, 0)?;
            Ok(Action::Noop)
        }
        "add_object" => {
            let args = arity(node, args, 5)?;
            let shape = word(&args[0], "shape")?;
            let size = word(&args[1], "size")?;
            let material = word(&args[2], "material")?;
            let color = word(&args[3], "color")?;
            let attrs = ObjectAttrs {
                shape: Shape::from_name(shape).ok_or_else(|| args[0].type_error(format!("`{shape}` is not a shape")))?,
                size: Size::from_name(size).ok_or_else(|| args[1].type_error(format!("`{size}` is not a size")))?,
                material: Material::from_name(material)
                    .ok_or_else(|| args[2].type_error(format!("`{material}` is not a material")))?,
                color: Color::from_name(color).ok_or_else(|| args[3].type_error(format!("`{color}` is not a color")))?,
            };
            Ok(Action::AddObject(attrs, placement(&args[4])?))
        }
        "remove" => Ok(Action::Remove(set_expr(&arity(node, args, 1)?[0])?)),
        "move" => {
            let args = arity(node, args, 2)?;
            Ok(Action::Move(set_expr(&args[0])?, placement(&args[1])?))
        }
        "seq" => {
            if inside_seq {
                return Err(node.type_error("seq nests deeper than two hops"));
            }
            let args = arity(node, args, 2)?;
            Ok(Action::seq(action(&args[0], true)?, action(&args[1], true)?))
        }
        _ => Err(node.type_error(format!("`{name}(...)` is not an action"))),
    }
}

/// Parses a program whose root is either a question or an action.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let tree = parse_tree(text)?;
    match &tree {
        Node::Call { name, .. } if is_question_root(name) => question(&tree).map(Program::Question),
        Node::Call { name, .. } if is_action_root(name) => action(&tree, false).map(Program::Action),
        _ => Err(tree.type_error("root is neither a question nor an action")),
    }
}

pub fn parse_question(text: &str) -> Result<Question, ProgramError> {
    question(&parse_tree(text)?)
}

pub fn parse_action(text: &str) -> Result<Action, ProgramError> {
    action(&parse_tree(text)?, false)
}
