//! STRIPS-subset PDDL import with typing. Actions are grounded over every
//! parameter binding and assigned to the agent bound to their first
//! parameter of the agent type.

use std::collections::{BTreeSet, HashMap};

use super::{ActionDocument, IoError, TaskDocument};

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            Sexp::Atom(..) => None,
        }
    }

    /// Head symbol of a list.
    fn head(&self) -> Option<&str> {
        self.list().and_then(|v| v.first()).and_then(Sexp::atom)
    }
}

fn syntax(line: usize, message: impl Into<String>) -> IoError {
    IoError::Pddl { line, message: message.into() }
}

fn unsupported(construct: &str, line: usize) -> IoError {
    IoError::Unsupported { construct: construct.to_string(), line }
}

fn tokenize(text: &str) -> Result<Sexp, IoError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = vec![(Vec::new(), 1)];
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split(';').next().unwrap_or("");
        let spaced = code.replace('(', " ( ").replace(')', " ) ");
        for tok in spaced.split_whitespace() {
            match tok {
                "(" => stack.push((Vec::new(), line)),
                ")" => {
                    if stack.len() < 2 {
                        return Err(syntax(line, "unbalanced `)`"));
                    }
                    let (items, start) = stack.pop().unwrap();
                    stack.last_mut().unwrap().0.push(Sexp::List(items, start));
                }
                t => stack.last_mut().unwrap().0.push(Sexp::Atom(t.to_ascii_lowercase(), line)),
            }
        }
    }
    if stack.len() != 1 {
        return Err(syntax(stack.last().unwrap().1, "unclosed `(`"));
    }
    let mut top = stack.pop().unwrap().0;
    match top.len() {
        1 => Ok(top.pop().unwrap()),
        0 => Err(syntax(1, "empty input")),
        _ => Err(syntax(top[1].line(), "trailing content after definition")),
    }
}

/// `a b - t c - u` → [(a,t), (b,t), (c,u)]; untyped names get `object`.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String, usize)>, IoError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, usize)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let it = &items[i];
        let Some(name) = it.atom() else {
            if it.head() == Some("either") {
                return Err(unsupported("either", it.line()));
            }
            return Err(syntax(it.line(), "expected a name in typed list"));
        };
        if name == "-" {
            let ty = items.get(i + 1).ok_or_else(|| syntax(it.line(), "missing type after `-`"))?;
            if ty.head() == Some("either") {
                return Err(unsupported("either", ty.line()));
            }
            let ty = ty.atom().ok_or_else(|| syntax(ty.line(), "expected a type name"))?;
            for (n, l) in pending.drain(..) {
                out.push((n, ty.to_string(), l));
            }
            i += 2;
        } else {
            pending.push((name.to_string(), it.line()));
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|(n, l)| (n, "object".to_string(), l)));
    Ok(out)
}

#[derive(Debug, Clone)]
struct AtomPattern {
    pred: String,
    args: Vec<String>,
    line: usize,
}

#[derive(Debug, Clone)]
struct Schema {
    name: String,
    params: Vec<(String, String)>,
    pre: Vec<AtomPattern>,
    add: Vec<AtomPattern>,
    del: Vec<AtomPattern>,
}

#[derive(Debug, Default)]
struct Domain {
    parents: HashMap<String, String>,
    constants: Vec<(String, String)>,
    predicates: HashMap<String, usize>,
    schemas: Vec<Schema>,
}

const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing"];

fn parse_atom(s: &Sexp, domain: &Domain) -> Result<AtomPattern, IoError> {
    let items = s.list().ok_or_else(|| syntax(s.line(), "expected an atom"))?;
    let pred = items.first().and_then(Sexp::atom).ok_or_else(|| syntax(s.line(), "expected a predicate name"))?;
    if ["and", "or", "not", "imply", "forall", "exists", "when", "=", "increase", "decrease"].contains(&pred) {
        return Err(unsupported(pred, s.line()));
    }
    let args: Vec<String> = items[1..]
        .iter()
        .map(|a| a.atom().map(str::to_string).ok_or_else(|| syntax(a.line(), "nested term in atom")))
        .collect::<Result<_, _>>()?;
    match domain.predicates.get(pred) {
        None => Err(syntax(s.line(), format!("undeclared predicate `{pred}`"))),
        Some(&k) if k != args.len() => Err(syntax(s.line(), format!("`{pred}` expects {k} arguments"))),
        Some(_) => Ok(AtomPattern { pred: pred.to_string(), args, line: s.line() }),
    }
}

/// Flatten a conjunction of positive atoms.
fn parse_conjunction(s: &Sexp, domain: &Domain, out: &mut Vec<AtomPattern>) -> Result<(), IoError> {
    match s.head() {
        Some("and") => {
            for c in &s.list().unwrap()[1..] {
                parse_conjunction(c, domain, out)?;
            }
            Ok(())
        }
        None if s.list().is_some_and(<[Sexp]>::is_empty) => Ok(()),
        _ => {
            out.push(parse_atom(s, domain)?);
            Ok(())
        }
    }
}

fn parse_effect(
    s: &Sexp,
    domain: &Domain,
    add: &mut Vec<AtomPattern>,
    del: &mut Vec<AtomPattern>,
) -> Result<(), IoError> {
    match s.head() {
        Some("and") => {
            for c in &s.list().unwrap()[1..] {
                parse_effect(c, domain, add, del)?;
            }
            Ok(())
        }
        Some("not") => {
            let items = s.list().unwrap();
            if items.len() != 2 {
                return Err(syntax(s.line(), "`not` takes one atom"));
            }
            del.push(parse_atom(&items[1], domain)?);
            Ok(())
        }
        None if s.list().is_some_and(<[Sexp]>::is_empty) => Ok(()),
        _ => {
            add.push(parse_atom(s, domain)?);
            Ok(())
        }
    }
}

fn parse_domain(text: &str) -> Result<Domain, IoError> {
    let root = tokenize(text)?;
    let items = root
        .list()
        .filter(|_| root.head() == Some("define"))
        .ok_or_else(|| syntax(root.line(), "expected (define ...)"))?;
    let mut d = Domain::default();
    for section in &items[1..] {
        let line = section.line();
        let body = section.list().ok_or_else(|| syntax(line, "expected a section"))?;
        match section.head() {
            Some("domain") => {}
            Some(":requirements") => {
                for r in &body[1..] {
                    let r = r.atom().ok_or_else(|| syntax(r.line(), "expected a requirement flag"))?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(unsupported(r, line));
                    }
                }
            }
            Some(":types") => {
                for (t, parent, _) in typed_list(&body[1..])? {
                    d.parents.insert(t, parent);
                }
            }
            Some(":constants") => {
                d.constants.extend(typed_list(&body[1..])?.into_iter().map(|(n, t, _)| (n, t)));
            }
            Some(":predicates") => {
                for p in &body[1..] {
                    let pv = p.list().ok_or_else(|| syntax(p.line(), "expected a predicate declaration"))?;
                    let name =
                        pv.first().and_then(Sexp::atom).ok_or_else(|| syntax(p.line(), "expected a predicate name"))?;
                    d.predicates.insert(name.to_string(), typed_list(&pv[1..])?.len());
                }
            }
            Some(":action") => {
                let name = body.get(1).and_then(Sexp::atom).ok_or_else(|| syntax(line, "expected an action name"))?;
                let mut schema = Schema {
                    name: name.to_string(),
                    params: Vec::new(),
                    pre: Vec::new(),
                    add: Vec::new(),
                    del: Vec::new(),
                };
                let mut i = 2;
                while i < body.len() {
                    let key = body[i].atom().ok_or_else(|| syntax(body[i].line(), "expected an action keyword"))?;
                    let val =
                        body.get(i + 1).ok_or_else(|| syntax(body[i].line(), format!("missing value for {key}")))?;
                    match key {
                        ":parameters" => {
                            let vs = val.list().ok_or_else(|| syntax(val.line(), "expected a parameter list"))?;
                            schema.params = typed_list(vs)?.into_iter().map(|(n, t, _)| (n, t)).collect();
                        }
                        ":precondition" => parse_conjunction(val, &d, &mut schema.pre)?,
                        ":effect" => parse_effect(val, &d, &mut schema.add, &mut schema.del)?,
                        other => return Err(unsupported(other, body[i].line())),
                    }
                    i += 2;
                }
                d.schemas.push(schema);
            }
            Some(other) => return Err(unsupported(other, line)),
            None => return Err(syntax(line, "expected a section keyword")),
        }
    }
    Ok(d)
}

struct ProblemDef {
    name: String,
    objects: Vec<(String, String)>,
    init: Vec<AtomPattern>,
    goal: Vec<AtomPattern>,
}

fn parse_problem(text: &str, domain: &Domain) -> Result<ProblemDef, IoError> {
    let root = tokenize(text)?;
    let items = root
        .list()
        .filter(|_| root.head() == Some("define"))
        .ok_or_else(|| syntax(root.line(), "expected (define ...)"))?;
    let mut p = ProblemDef { name: String::new(), objects: Vec::new(), init: Vec::new(), goal: Vec::new() };
    for section in &items[1..] {
        let line = section.line();
        let body = section.list().ok_or_else(|| syntax(line, "expected a section"))?;
        match section.head() {
            Some("problem") => {
                p.name = body
                    .get(1)
                    .and_then(Sexp::atom)
                    .ok_or_else(|| syntax(line, "expected a problem name"))?
                    .to_string();
            }
            Some(":domain") => {}
            Some(":requirements") => {
                for r in &body[1..] {
                    let r = r.atom().unwrap_or("");
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return Err(unsupported(r, line));
                    }
                }
            }
            Some(":objects") => p.objects.extend(typed_list(&body[1..])?.into_iter().map(|(n, t, _)| (n, t))),
            Some(":init") => {
                for a in &body[1..] {
                    p.init.push(parse_atom(a, domain)?);
                }
            }
            Some(":goal") => {
                let g = body.get(1).ok_or_else(|| syntax(line, "empty goal"))?;
                parse_conjunction(g, domain, &mut p.goal)?;
            }
            Some(other) => return Err(unsupported(other, line)),
            None => return Err(syntax(line, "expected a section keyword")),
        }
    }
    Ok(p)
}

fn is_subtype<'a>(parents: &'a HashMap<String, String>, mut t: &'a str, ancestor: &str) -> bool {
    for _ in 0..=parents.len() {
        if t == ancestor {
            return true;
        }
        match parents.get(t) {
            Some(p) => t = p,
            None => return ancestor == "object",
        }
    }
    false
}

fn ground_name(pred: &str, args: &[&str]) -> String {
    if args.is_empty() {
        pred.to_string()
    } else {
        format!("{}({})", pred, args.join(","))
    }
}

fn ground(atom: &AtomPattern, binding: &HashMap<&str, &str>, objects: &HashMap<&str, &str>) -> Result<String, IoError> {
    let args: Vec<&str> = atom
        .args
        .iter()
        .map(|a| {
            if a.starts_with('?') {
                binding.get(a.as_str()).copied().ok_or_else(|| syntax(atom.line, format!("unbound variable `{a}`")))
            } else if objects.contains_key(a.as_str()) {
                Ok(a.as_str())
            } else {
                Err(syntax(atom.line, format!("unknown object `{a}`")))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(ground_name(&atom.pred, &args))
}

/// Ground a domain/problem pair into a task document.
pub fn import_pddl(domain: &[u8], problem: &[u8], agent_type: &str) -> Result<TaskDocument, IoError> {
    let utf8 = |b: &[u8]| std::str::from_utf8(b).map(str::to_string).map_err(|e| IoError::Utf8(e.to_string()));
    let d = parse_domain(&utf8(domain)?)?;
    let p = parse_problem(&utf8(problem)?, &d)?;
    let agent_type = agent_type.to_ascii_lowercase();

    let all_objects: Vec<(String, String)> = d.constants.iter().chain(&p.objects).cloned().collect();
    let object_types: HashMap<&str, &str> = all_objects.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
    let of_type = |t: &str| -> Vec<&str> {
        all_objects.iter().filter(|(_, ot)| is_subtype(&d.parents, ot, t)).map(|(n, _)| n.as_str()).collect()
    };
    let agents: Vec<String> = of_type(&agent_type).into_iter().map(str::to_string).collect();
    if agents.is_empty() {
        return Err(syntax(1, format!("no objects of agent type `{agent_type}`")));
    }

    let mut facts = BTreeSet::new();
    let no_binding = HashMap::new();
    let ground_all = |atoms: &[AtomPattern], facts: &mut BTreeSet<String>| -> Result<Vec<String>, IoError> {
        let out: BTreeSet<String> =
            atoms.iter().map(|a| ground(a, &no_binding, &object_types)).collect::<Result<_, _>>()?;
        facts.extend(out.iter().cloned());
        Ok(out.into_iter().collect())
    };
    let init = ground_all(&p.init, &mut facts)?;
    let goal = ground_all(&p.goal, &mut facts)?;

    let mut actions = Vec::new();
    for s in &d.schemas {
        let owner_param =
            s.params.iter().position(|(_, t)| is_subtype(&d.parents, t, &agent_type)).ok_or_else(|| {
                IoError::Unsupported { construct: format!("action `{}` without an agent parameter", s.name), line: 0 }
            })?;
        let domains: Vec<Vec<&str>> = s.params.iter().map(|(_, t)| of_type(t)).collect();
        if domains.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; domains.len()];
        loop {
            let args: Vec<&str> = idx.iter().zip(&domains).map(|(i, dom)| dom[*i]).collect();
            let binding: HashMap<&str, &str> =
                s.params.iter().map(|(v, _)| v.as_str()).zip(args.iter().copied()).collect();
            let g = |atoms: &[AtomPattern]| -> Result<BTreeSet<String>, IoError> {
                atoms.iter().map(|a| ground(a, &binding, &object_types)).collect()
            };
            let pre = g(&s.pre)?;
            let add = g(&s.add)?;
            let del: BTreeSet<String> = g(&s.del)?.difference(&add).cloned().collect();
            facts.extend(pre.iter().chain(&add).chain(&del).cloned());
            actions.push(ActionDocument {
                agent: args[owner_param].to_string(),
                name: ground_name(&s.name, &args),
                pre: pre.into_iter().collect(),
                add: add.into_iter().collect(),
                del: del.into_iter().collect(),
                cost: 1.0,
            });
            // advance the odometer, last parameter fastest
            let mut k = idx.len();
            let exhausted = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break false;
                }
                idx[k] = 0;
            };
            if exhausted {
                break;
            }
        }
    }

    Ok(TaskDocument {
        name: p.name,
        agents,
        facts: facts.into_iter().collect(),
        init,
        goal,
        actions,
        public_facts: Vec::new(),
    })
}
