mod program {
    use sceneact_core::program::*;
    use sceneact_core::scene::AttrValue;
    use sceneact_core::scene::{Color, Material, Shape};

    #[test]
    fn renders_count_scene() {
        assert_eq!(Question::Count(SetExpr::Scene).to_string(), "count(scene())");
    }

    #[test]
    fn renders_seq() {
        let red = SetExpr::Scene.filter(AttrValue::Color(Color::Red));
        let cube = SetExpr::Scene.filter(AttrValue::Shape(Shape::Cube));
        let p = Action::seq(Action::Remove(red), Action::Change(cube, AttrValue::Color(Color::Cyan)));
        assert_eq!(
            p.to_string(),
            "seq(remove(filter_color(scene(),red)),change_color(filter_shape(scene(),cube),cyan))"
        );
    }

    #[test]
    fn filtered_nests_first_value_innermost() {
        let s = SetExpr::filtered([AttrValue::Material(Material::Metal), AttrValue::Color(Color::Red)]);
        assert_eq!(s.to_string(), "filter_color(filter_material(scene(),metal),red)");
    }
}

mod parse {
    use sceneact_core::program::*;
    use sceneact_core::error::ProgramError;
    use sceneact_core::scene::{AttrValue, Color, Material};

    const FOOTNOTE: &str = "count(filter_color(filter_material(scene(),metal),red))";

    #[test]
    fn parses_counting_question() {
        let q = parse_question(FOOTNOTE).unwrap();
        let expected = Question::Count(
            SetExpr::Scene.filter(AttrValue::Material(Material::Metal)).filter(AttrValue::Color(Color::Red)),
        );
        assert_eq!(q, expected);
        assert_eq!(q.to_string(), FOOTNOTE);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let spaced = " count ( filter_color ( filter_material( scene ( ) , metal ) ,red ) ) ";
        assert_eq!(parse_question(spaced).unwrap().to_string(), FOOTNOTE);
    }

    #[test]
    fn set_valued_root_is_a_type_error() {
        assert!(matches!(parse_question("scene()"), Err(ProgramError::Type { .. })));
        assert!(matches!(parse_program("scene()"), Err(ProgramError::Type { .. })));
    }

    #[test]
    fn unknown_color_is_a_type_error_naming_the_literal() {
        match parse_question("count(filter_color(scene(),shiny))") {
            Err(ProgramError::Type { node, .. }) => assert_eq!(node, "shiny"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse_question("count(scene()") {
            Err(ProgramError::Syntax { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_question("count(scene()))"), Err(ProgramError::Syntax { offset: 14, .. })));
        assert!(matches!(parse_question("count(scéne())"), Err(ProgramError::Syntax { offset: 8, .. })));
    }

    #[test]
    fn wrong_argument_types_are_rejected() {
        assert!(parse_question("count(unique(scene()))").is_err());
        assert!(parse_question("query_color(scene())").is_err());
        assert!(parse_question("greater_than(scene(),count(scene()))").is_err());
        assert!(parse_action("relative(on,scene())").is_err());
        assert!(parse_action("move(scene(),relative(on,scene()))").is_err());
    }

    #[test]
    fn seq_depth_is_limited() {
        let two = "seq(remove(scene()),noop())";
        assert!(parse_action(two).is_ok());
        assert!(parse_action(&format!("seq({two},noop())")).is_err());
    }

    #[test]
    fn action_round_trip() {
        let text = "seq(move(filter_color(scene(),purple),on(filter_shape(filter_color(scene(),red),cube))),\
                    change_color(filter_color(scene(),purple),cyan))";
        assert_eq!(parse_action(text).unwrap().to_string(), text);
        let add = "add_object(cube,small,rubber,red,absolute(1.25,-0.5))";
        assert_eq!(parse_action(add).unwrap().to_string(), add);
    }
}

mod exec {
    use sceneact_core::program::*;
    use sceneact_core::answer::Answer;
    use sceneact_core::error::ExecError;
    use sceneact_core::scene::{validate_scene, Scene, SceneObject};
    use sceneact_core::program::{parse_action, parse_question};
    use sceneact_core::scene::{scene_equal, Color, Material, ObjectAttrs, Shape, Size};

    fn obj(shape: Shape, size: Size, material: Material, color: Color, x: f64, y: f64) -> SceneObject {
        SceneObject::new(ObjectAttrs { shape, size, material, color }, [x, y, 0.0])
    }

    fn red_cube_blue_sphere() -> Scene {
        Scene::new(vec![
            obj(Shape::Cube, Size::Small, Material::Rubber, Color::Red, -1.0, 0.0),
            obj(Shape::Sphere, Size::Big, Material::Metal, Color::Blue, 1.0, 0.5),
        ])
    }

    fn ask(q: &str, s: &Scene) -> Answer {
        exec_question(&parse_question(q).unwrap(), s).unwrap()
    }

    fn act(a: &str, s: &Scene) -> Scene {
        exec_action(&parse_action(a).unwrap(), s).unwrap()
    }

    #[test]
    fn counting_examples() {
        let s = red_cube_blue_sphere();
        assert_eq!(ask("count(filter_color(filter_material(scene(),metal),red))", &s), Answer::Count(0));
        assert_eq!(ask("count(scene())", &Scene::empty()), Answer::Count(0));
        let three = Scene::new(vec![
            obj(Shape::Cube, Size::Small, Material::Rubber, Color::Red, -2.0, 0.0),
            obj(Shape::Cylinder, Size::Small, Material::Rubber, Color::Red, 0.0, 0.0),
            obj(Shape::Sphere, Size::Small, Material::Rubber, Color::Blue, 2.0, 0.0),
        ]);
        assert_eq!(ask("count(or(filter_color(scene(),red),filter_shape(scene(),cylinder)))", &three), Answer::Count(2));
        assert_eq!(ask("count(not(filter_color(scene(),red)))", &three), Answer::Count(1));
        assert_eq!(ask("count(relate(unique(filter_shape(scene(),cylinder)),left))", &three), Answer::Count(1));
    }

    #[test]
    fn yes_no_and_query_examples() {
        let s = red_cube_blue_sphere();
        assert_eq!(ask("exist(filter_color(scene(),purple))", &s), Answer::No);
        assert_eq!(ask("query_material(unique(filter_shape(scene(),sphere)))", &s), Answer::Material(Material::Metal));
        assert_eq!(
            ask("equal_size(unique(filter_shape(scene(),sphere)),unique(filter_shape(scene(),cube)))", &s),
            Answer::No
        );
        assert_eq!(ask("greater_than(count(scene()),count(filter_color(scene(),red)))", &s), Answer::Yes);
    }

    #[test]
    fn unique_requires_a_singleton() {
        let q = parse_question("query_color(unique(scene()))").unwrap();
        assert!(matches!(exec_question(&q, &red_cube_blue_sphere()), Err(ExecError::NonUnique { size: 2, .. })));
    }

    #[test]
    fn remove_example() {
        let s = red_cube_blue_sphere();
        let out = act("remove(filter_color(scene(),red))", &s);
        assert!(scene_equal(&out, &Scene::new(vec![s.objects[1]]), 0.0));
    }

    #[test]
    fn change_keeps_positions() {
        let s = red_cube_blue_sphere();
        let out = act("change_color(filter_shape(scene(),cube),cyan)", &s);
        let mut expected = s.clone();
        expected.objects[0].color = Color::Cyan;
        assert!(scene_equal(&out, &expected, 0.0));
    }

    #[test]
    fn empty_target_is_a_no_op() {
        let s = red_cube_blue_sphere();
        assert!(scene_equal(&act("remove(filter_color(scene(),purple))", &s), &s, 0.0));
        assert!(scene_equal(&act("move(filter_color(scene(),purple),on(scene()))", &s), &s, 0.0));
    }

    #[test]
    fn add_without_placement_uses_first_grid_cell() {
        let out = act("add_object(cylinder,big,metal,green,ground())", &red_cube_blue_sphere());
        assert_eq!(out.len(), 3);
        assert!(out.objects.iter().any(|o| o.shape == Shape::Cylinder && o.pos == [-3.0, 3.0, 0.0]));
    }

    #[test]
    fn relative_and_on_placements() {
        let s = red_cube_blue_sphere();
        let out = act("add_object(cube,big,metal,green,relative(behind,filter_color(scene(),red)))", &s);
        let green = out.objects.iter().find(|o| o.color == Color::Green).unwrap();
        assert_eq!(green.pos, [-1.0, 1.0, 0.0]);

        let out = act("move(filter_color(scene(),red),on(filter_color(scene(),blue)))", &s);
        let red = out.objects.iter().find(|o| o.color == Color::Red).unwrap();
        assert_eq!(red.pos, [1.0, 0.5, 1.4]);
        assert!(validate_scene(&out).is_valid());
    }

    #[test]
    fn anchor_must_be_unique() {
        let a = parse_action("add_object(cube,big,metal,green,relative(left,scene()))").unwrap();
        assert_eq!(exec_action(&a, &red_cube_blue_sphere()), Err(ExecError::NonUniqueAnchor { size: 2 }));
    }

    #[test]
    fn capacity_is_enforced() {
        let objects = (0..10).map(|i| obj(Shape::Cube, Size::Small, Material::Rubber, Color::Red, -2.7 + 0.6 * i as f64, 0.0)).collect();
        let a = parse_action("add_object(cube,big,metal,green,ground())").unwrap();
        assert_eq!(exec_action(&a, &Scene::new(objects)), Err(ExecError::Capacity));
    }

    #[test]
    fn removing_a_support_drops_the_stacked_object() {
        let s = act("move(filter_color(scene(),red),on(filter_color(scene(),blue)))", &red_cube_blue_sphere());
        let out = act("remove(filter_color(scene(),blue))", &s);
        assert_eq!(out.len(), 1);
        assert_eq!(out.objects[0].pos[2], 0.0);
        assert!(validate_scene(&out).is_valid());
    }

    #[test]
    fn seq_equals_sequential_execution() {
        let s = red_cube_blue_sphere();
        let first = "move(filter_color(scene(),red),relative(front,filter_color(scene(),blue)))";
        let second = "change_color(filter_shape(scene(),cube),cyan)";
        let chained = act(&format!("seq({first},{second})"), &s);
        assert_eq!(chained, act(second, &act(first, &s)));
    }

    #[test]
    fn input_scene_is_not_mutated() {
        let s = red_cube_blue_sphere();
        let before = s.clone();
        act("remove(scene())", &s);
        assert_eq!(s, before);
    }
}
