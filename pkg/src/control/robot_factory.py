import logging
from typing import Any, Optional

from src.control.replay_robot import ReplayRobot
from src.control.robot_interface import RobotInterface
from src.kinematics.chain_loader import load_chain_file
from src.observation.registry import load_registry_file
from src.simulation.scenario import default_scenario, load_scenario_file
from src.utils.json_io import load_document

logger = logging.getLogger(__name__)


class RobotFactory:
    """机器人适配器工厂"""

    @staticmethod
    def create_robot(robot_type: str, **options: Any) -> Optional[RobotInterface]:
        """根据类型创建机器人适配器

        Args:
            robot_type: 'simulated' 或 'replay'
            options:
                simulated: scenario (Scenario 对象) 或 scenario_path 或 profile，seed，initial_theta，camera_pose
                replay: log_path，chain_path，registry_path

        Returns:
            机器人适配器实例，如果类型不支持则返回None
        """
        robot_type = robot_type.lower()
        if robot_type == 'simulated':
            scenario = options.get('scenario')
            if scenario is None and options.get('scenario_path'):
                scenario = load_scenario_file(options['scenario_path'])
            if scenario is None:
                scenario = default_scenario(options.get('profile', 'low_cost'))
            return scenario.build_robot(
                int(options.get('seed', 0)),
                initial_theta=options.get('initial_theta'),
                camera_pose=options.get('camera_pose'),
            )
        elif robot_type == 'replay':
            chain = load_chain_file(options['chain_path'])
            registry = load_registry_file(options['registry_path'], chain)
            log_path = options['log_path']
            return ReplayRobot.from_simulation_log(load_document(log_path), chain, registry, source=log_path)
        logger.error(f"不支持的机器人类型: {robot_type}")
        return None
